use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use satstack::schema::{ConfigFile, LawFile, PolicySpec, SaturationSpec, SchemaError};
use satstack_core::saturation::quartic_reference;
use satstack_core::synthesis::{assemble_feedback, LambdaPolicy};

const REFERENCE: &str = include_str!("../configs/reference.json");
const HERMITE: &str = include_str!("../configs/hermite.json");

fn config(text: &str) -> ConfigFile {
    serde_json::from_str(text).unwrap()
}

#[test]
fn reference_config_matches_builtin_saturation() {
    let cfg = config(REFERENCE).to_config().unwrap();
    assert_eq!(cfg.p, 2);
    assert_eq!(cfg.saturations.len(), 3);
    assert!(cfg.saturations.iter().all(|s| *s == {
        let q = quartic_reference(2);
        satstack_core::SaturationFunction::from_pieces(q.pieces().to_vec(), *q.constants()).unwrap()
    }));
    assert_eq!(cfg.lambda_policy, LambdaPolicy::PerOrder);
}

#[test]
fn policy_field_is_kebab_case() {
    let mut file = config(REFERENCE);
    file.policy = Some(PolicySpec::Uniform);
    let text = serde_json::to_string(&file).unwrap();
    assert!(text.contains("\"policy\":\"paper\""));
    assert_eq!(
        config(&text).to_config().unwrap().lambda_policy,
        LambdaPolicy::Uniform
    );
}

#[test]
fn saturation_spec_round_trip() {
    let hermite = SaturationSpec {
        p: 2,
        sigma_max: 1.0,
        linear_threshold: 0.5,
        saturation_threshold: 1.5,
        alpha: 1.0,
        pieces: None,
    };
    let f = hermite.build().unwrap();
    let back = SaturationSpec::from_function(&f);
    assert_eq!(back, hermite);

    let q = quartic_reference(2);
    let spec = SaturationSpec::from_function(&q);
    assert_eq!(spec.pieces.as_ref().map(Vec::len), Some(3));
    let rebuilt = spec.build().unwrap();
    for i in 0..=400 {
        let r = -3.0 + 6.0 * i as f64 / 400.0;
        for j in 0..=2 {
            assert_eq!(rebuilt.derivative_at(r, j), q.derivative_at(r, j));
        }
    }
}

#[test]
fn law_round_trip_agrees_on_random_states() {
    for text in [REFERENCE, HERMITE] {
        let cfg = config(text).to_config().unwrap();
        let law = assemble_feedback(&cfg).unwrap();
        let file = LawFile::from_law(&law, &cfg.budgets);
        let json = serde_json::to_string_pretty(&file).unwrap();
        let back: LawFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, file);
        let reloaded = back.to_law().unwrap();
        assert_eq!(reloaded.lambda, law.lambda);
        assert_eq!(reloaded.bounds, law.bounds);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let scale = 10f64.powi(rng.random_range(-3..4));
            let x: Vec<f64> = (0..law.n()).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
            let (a, b) = (law.eval(&x).unwrap(), reloaded.eval(&x).unwrap());
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn law_file_rejects_tampering() {
    let cfg = config(HERMITE).to_config().unwrap();
    let law = assemble_feedback(&cfg).unwrap();
    let good = LawFile::from_law(&law, &cfg.budgets);

    let mut bad = good.clone();
    bad.schema_version = 99;
    assert!(matches!(bad.to_law(), Err(SchemaError::Version { found: 99 })));

    let mut bad = good.clone();
    bad.a[0] *= 1.01;
    assert!(matches!(bad.to_law(), Err(SchemaError::Invalid(_))));

    let mut bad = good.clone();
    bad.budgets.pop();
    assert!(bad.to_law().is_err());

    let mut bad = good;
    bad.n = 5;
    assert!(bad.to_law().is_err());
}

#[test]
fn invalid_configs_are_reported() {
    let mut file = config(HERMITE);
    file.saturations[0].saturation_threshold = file.saturations[0].linear_threshold;
    assert!(file.to_config().is_err());

    let mut file = config(HERMITE);
    file.budgets = vec![1.0, 0.0, 1.0];
    assert!(file.to_config().is_err());

    let mut file = config(HERMITE);
    file.schema_version = 2;
    assert!(file.to_config().is_err());

    assert!(serde_json::from_str::<ConfigFile>(r#"{"schema_version": 1}"#).is_err());
}
