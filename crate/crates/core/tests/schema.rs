use serde_json::Value;
use shoplab_core::fixtures::example_one;
use shoplab_core::io::{generate, GeneratorSpec, InstanceFile};
use shoplab_core::Rational;

fn schema() -> Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/instance.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn keys(v: &Value) -> Vec<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

#[test]
fn schema_fields_match_serialised_instances() {
    let schema = schema();
    let props = &schema["properties"];
    let bidder_props = &props["bidders"]["items"]["properties"];
    let files = [
        InstanceFile::from_instance(&example_one::<Rational>()).unwrap(),
        generate(&GeneratorSpec { self_pricing: true, seed: 3, ..GeneratorSpec::default() }).unwrap(),
    ];
    for file in files {
        let json: Value = serde_json::from_str(&file.to_json()).unwrap();
        assert_eq!(keys(&json), keys(props));
        for bidder in json["bidders"].as_array().unwrap() {
            assert_eq!(keys(bidder), keys(bidder_props));
        }
    }
}

fn example_text() -> String {
    InstanceFile::from_instance(&example_one::<Rational>()).unwrap().to_json()
}

#[test]
fn required_fields_suffice() {
    let full: Value = serde_json::from_str(&example_text()).unwrap();
    let minimal: serde_json::Map<String, Value> = schema()["required"]
        .as_array()
        .unwrap()
        .iter()
        .map(|k| k.as_str().unwrap())
        .map(|k| (k.to_string(), full[k].clone()))
        .collect();
    assert!(InstanceFile::from_json(&Value::Object(minimal).to_string()).is_ok());
}

#[test]
fn unknown_fields_are_rejected() {
    let text = example_text().replacen("\"cap\"", "\"extra\": 1, \"cap\"", 1);
    assert!(InstanceFile::from_json(&text).is_err());
}
