mod common;

use common::*;
use expert_skip::calibration::GlobalFactors;
use expert_skip::engine::{ModelSpec, RouterTuning, SyntheticMoeModel};
use expert_skip::io::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn model_codec_is_bijective(
        l in 1usize..4, m in 1usize..6, kf in 0.0f64..1.0, d in 1usize..6, f in 1usize..6, v in 1usize..8,
        seed in any::<u64>(), gain in 0.1f64..8.0, vt in 0.5f64..4.0,
    ) {
        let k = 1 + ((m - 1) as f64 * kf) as usize;
        let spec = ModelSpec::new(l, m, k, d, f, v, seed)
            .unwrap()
            .with_router(RouterTuning { gain, text_temperature: 1.0, vision_temperature: vt });
        let model = SyntheticMoeModel::build(&spec).unwrap();
        let bytes = encode_model(&model);
        prop_assert_eq!(&bytes[..4], b"MDES");
        let back = decode_model(&bytes).unwrap();
        prop_assert_eq!(&back, &model);
        prop_assert_eq!(encode_model(&back), bytes);
    }

    #[test]
    fn factors_codec_is_bijective(alpha in prop::collection::vec(0.0f64..10.0, 1..12), seed in any::<u64>(), n in 1usize..5000) {
        let file = FactorsFile {
            model_hash: format!("{seed:x}"),
            samples: n,
            seed,
            factors: GlobalFactors::from_alpha(alpha).unwrap(),
        };
        let text = render_factors(&file).unwrap();
        let back = parse_factors(&text, "mem").unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(render_factors(&back).unwrap(), text);
    }

    #[test]
    fn config_codec_is_bijective(seed in any::<u64>(), rho in 0.01f64..0.99, tf in 0.0f64..1.0, n in 1usize..4096) {
        let cfg = ExperimentConfig { seed, rho, text_fraction: tf, samples: n, ..Default::default() };
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text, "mem").unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml().unwrap(), text);
    }
}

#[test]
fn files_round_trip_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let model = model(2, 4, 2, 8);
    let p = dir.path().join("m.bin");
    save_model(&model, &p).unwrap();
    let first = std::fs::read(&p).unwrap();
    save_model(&load_model(&p).unwrap(), &p).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), first);

    let set = calib(5, 4, 0.5, 16, 1);
    let p = dir.path().join("d.csv");
    save_dataset(&set, &p).unwrap();
    let first = std::fs::read(&p).unwrap();
    let back = load_dataset(&p).unwrap();
    assert_eq!(back, set);
    save_dataset(&back, &p).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), first);

    let cfg = ExperimentConfig::default();
    let p = dir.path().join("c.toml");
    save_config(&cfg, &p).unwrap();
    let first = std::fs::read(&p).unwrap();
    save_config(&load_config(&p).unwrap(), &p).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), first);
}

#[test]
fn dataset_errors_carry_context() {
    let bad = "sample,position,modality,embed_index\n0,0,text,1\n0,1,audio,2\n";
    let err = read_dataset(bad.as_bytes(), "d.csv").unwrap_err().to_string();
    assert!(err.contains("modality") && err.contains("d.csv"), "{err}");
    let gap = "sample,position,modality,embed_index\n0,0,text,1\n2,0,text,2\n";
    assert!(read_dataset(gap.as_bytes(), "d.csv").is_err());
}

#[test]
fn config_file_documents_every_field() {
    let text = ExperimentConfig::default().to_toml().unwrap();
    for key in [
        "format_version",
        "seed",
        "samples",
        "grid_points",
        "rho",
        "text_fraction",
        "sequence_length",
        "[model]",
        "[model.router]",
        "[policy]",
    ] {
        assert!(text.contains(key), "{key} missing from\n{text}");
    }
}

#[test]
fn corrupted_model_files_are_rejected() {
    let bytes = encode_model(&model(1, 2, 1, 3));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_model(&bad), Err(expert_skip::Error::Format(_))));
    assert!(decode_model(&bytes[..bytes.len() - 1]).is_err());
    let mut long = bytes.clone();
    long.push(0);
    assert!(decode_model(&long).is_err());
    let mut version = bytes;
    version[4] = 9;
    let err = decode_model(&version).unwrap_err().to_string();
    assert!(err.contains("version"), "{err}");
}

#[test]
fn config_version_mismatch_is_named() {
    let text = ExperimentConfig::default().to_toml().unwrap().replace("format_version = 1", "format_version = 2");
    let err = ExperimentConfig::from_toml(&text, "c.toml").unwrap_err().to_string();
    assert!(err.contains("version mismatch"), "{err}");
}
