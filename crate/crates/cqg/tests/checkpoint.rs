use std::path::Path;

use cqg::checkpoint::{from_bytes, load, save, to_bytes, MAGIC};
use cqg::Error;
use cqg_core::model::{greedy, Input, Model, ModelConfig, Variant};
use cqg_core::synth::generate_synthetic_corpus;
use cqg_core::text::Token;
use cqg_core::training::{train, SubqMode, TrainConfig};
use cqg_core::vocab::FeatureTables;

fn trained(variant: Variant) -> Model {
    let (samples, simple) = generate_synthetic_corpus(2, 4, 8).unwrap();
    let qs: Vec<&[Token]> = samples
        .iter()
        .flat_map(|s| s.references.iter().chain(s.subquestion.iter()))
        .chain(simple.iter().flat_map(|s| s.references.iter()))
        .map(|q| q.as_slice())
        .collect();
    let tables = FeatureTables::build(samples.iter().chain(&simple).map(|s| &s.graph), qs);
    let mut model = Model::new(ModelConfig::tiny(variant), tables, 3).unwrap();
    let cfg = TrainConfig {
        lr: 1e-2,
        max_epochs: 2,
        subq_mode: SubqMode::default_for(variant),
        ..Default::default()
    };
    train(&mut model, &samples, &samples[..1], &simple, &cfg, |_, _| Ok(())).unwrap();
    model
}

fn rejects(bytes: &[u8]) -> String {
    match from_bytes(bytes, Path::new("m.cqg")) {
        Err(Error::Checkpoint { message, .. }) => message,
        Err(e) => e.to_string(),
        Ok(_) => panic!("corrupt checkpoint accepted"),
    }
}

#[test]
fn round_trip_keeps_values_moments_and_step() {
    for v in Variant::ALL {
        let model = trained(v);
        assert!(model.store.step() > 0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.cqg");
        save(&p, &model).unwrap();
        let back = load(&p).unwrap();
        assert_eq!(back.config, model.config);
        assert_eq!(back.tables, model.tables);
        assert_eq!(back.store, model.store);
        for (a, b) in back.store.iter().zip(model.store.iter()) {
            assert_eq!(a.first_moment(), b.first_moment());
            assert_eq!(a.second_moment(), b.second_moment());
        }
        assert_eq!(to_bytes(&back), to_bytes(&model));
    }
}

#[test]
fn restored_model_decodes_identically() {
    let model = trained(Variant::Cog2q);
    let back = from_bytes(&to_bytes(&model), Path::new("m.cqg")).unwrap();
    let (samples, _) = generate_synthetic_corpus(2, 4, 8).unwrap();
    for s in &samples {
        let input = Input::graph_only(&s.graph);
        assert_eq!(greedy(&model, &input, 12).unwrap(), greedy(&back, &input, 12).unwrap());
    }
}

#[test]
fn corruption_is_detected() {
    let bytes = to_bytes(&trained(Variant::Cog2q));
    assert!(bytes.starts_with(MAGIC));
    assert!(rejects(&bytes[1..]).contains("CQGKIT1"));
    assert!(rejects(&bytes[..bytes.len() - 3]).contains("expected"));
    let mut longer = bytes.clone();
    longer.extend_from_slice(&[0; 8]);
    assert!(rejects(&longer).contains("expected"));

    let text = String::from_utf8_lossy(&bytes[..bytes.iter().skip(MAGIC.len()).position(|&b| b == b'\n').unwrap() + MAGIC.len()]).into_owned();
    let tampered = text.replacen("\"m\":2", "\"m\":3", 1);
    assert_ne!(tampered, text);
    let mut b2 = tampered.into_bytes();
    b2.extend_from_slice(&bytes[text.len()..]);
    assert!(rejects(&b2).contains("hash"));
}
