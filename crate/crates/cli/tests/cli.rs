//! End-to-end tests running the compiled `nucleitool` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nucleitool_core::dataset::{self, LabelPair};
use nucleitool_core::grid::Grid;
use nucleitool_core::rng::Rng;
use nucleitool_core::types::ClassId;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nucleitool"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("failed to spawn nucleitool");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Labels with axis-aligned rectangular nuclei, sized so the decoder
/// recovers them exactly.
fn rect_labels(rng: &mut Rng, images: usize) -> Vec<LabelPair> {
    let mut out = Vec::new();
    for _ in 0..images {
        let mut inst = Grid::filled(96, 96, 0u32);
        let mut cls = Grid::filled(96, 96, ClassId::BACKGROUND);
        let mut id = 0u32;
        for block_r in 0..3usize {
            for block_c in 0..3usize {
                if rng.bernoulli(0.3) {
                    continue;
                }
                id += 1;
                let h = 14 + rng.next_index(7);
                let w = 14 + rng.next_index(7);
                let r0 = block_r * 32 + 3;
                let c0 = block_c * 32 + 3;
                let class = ClassId::new((rng.next_index(6) + 1) as u8).unwrap();
                for r in r0..r0 + h {
                    for c in c0..c0 + w {
                        inst.set(r, c, id);
                        cls.set(r, c, class);
                    }
                }
            }
        }
        out.push((inst, cls));
    }
    out
}

#[test]
fn evaluate_of_identical_labels_is_perfect() {
    let dir = tmp("eval-perfect");
    let mut rng = Rng::new(21);
    let labels = rect_labels(&mut rng, 4);
    let path = dir.join("labels.npy");
    dataset::write_labels(&path, &labels).unwrap();

    let out = run_ok(bin().args([
        "evaluate",
        "--gt",
        path.to_str().unwrap(),
        "--pred",
        path.to_str().unwrap(),
    ]));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["mpq_plus"], 1.0);
    assert_eq!(json["r2_mean"], 1.0);
}

#[test]
fn full_chain_encode_postprocess_evaluate() {
    let dir = tmp("full-chain");
    let mut rng = Rng::new(33);
    let labels = rect_labels(&mut rng, 6);
    let labels_path = dir.join("labels.npy");
    dataset::write_labels(&labels_path, &labels).unwrap();

    let target_dir = dir.join("targets");
    run_ok(bin().args([
        "encode",
        "--labels",
        labels_path.to_str().unwrap(),
        "--out-dir",
        target_dir.to_str().unwrap(),
    ]));
    for file in ["np.npy", "hv.npy", "dg.npy", "tp.npy"] {
        assert!(target_dir.join(file).exists(), "missing {file}");
    }

    let decoded_path = dir.join("decoded.npy");
    run_ok(bin().args([
        "postprocess",
        "--pred-dir",
        target_dir.to_str().unwrap(),
        "--out",
        decoded_path.to_str().unwrap(),
    ]));

    let out = run_ok(bin().args([
        "evaluate",
        "--gt",
        labels_path.to_str().unwrap(),
        "--pred",
        decoded_path.to_str().unwrap(),
    ]));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let mpq = json["mpq_plus"].as_f64().unwrap();
    assert!(mpq >= 0.95, "round-trip mPQ+ {mpq}");
}

#[test]
fn ensemble_of_one_directory_is_identical() {
    let dir = tmp("ensemble-one");
    let mut rng = Rng::new(11);
    let labels = rect_labels(&mut rng, 2);
    let labels_path = dir.join("labels.npy");
    dataset::write_labels(&labels_path, &labels).unwrap();
    let target_dir = dir.join("targets");
    run_ok(bin().args([
        "encode",
        "--labels",
        labels_path.to_str().unwrap(),
        "--out-dir",
        target_dir.to_str().unwrap(),
    ]));

    let avg_dir = dir.join("avg");
    run_ok(bin().args([
        "ensemble",
        "--input",
        target_dir.to_str().unwrap(),
        "--out-dir",
        avg_dir.to_str().unwrap(),
    ]));
    for file in ["np.npy", "hv.npy", "dg.npy", "tp.npy"] {
        let a = std::fs::read(target_dir.join(file)).unwrap();
        let b = std::fs::read(avg_dir.join(file)).unwrap();
        assert_eq!(a, b, "{file} changed under K=1 ensembling");
    }
}

#[test]
fn ensemble_averages_two_models() {
    let dir = tmp("ensemble-two");
    let mut rng = Rng::new(12);
    let labels = rect_labels(&mut rng, 2);
    let labels_path = dir.join("labels.npy");
    dataset::write_labels(&labels_path, &labels).unwrap();
    let t1 = dir.join("m1");
    run_ok(bin().args([
        "encode",
        "--labels",
        labels_path.to_str().unwrap(),
        "--out-dir",
        t1.to_str().unwrap(),
    ]));
    // Second "model": same maps; averaging must reproduce them.
    let t2 = dir.join("m2");
    std::fs::create_dir_all(&t2).unwrap();
    for file in ["np.npy", "hv.npy", "dg.npy", "tp.npy"] {
        std::fs::copy(t1.join(file), t2.join(file)).unwrap();
    }
    let avg_dir = dir.join("avg");
    run_ok(bin().args([
        "ensemble",
        "--input",
        t1.to_str().unwrap(),
        "--input",
        t2.to_str().unwrap(),
        "--out-dir",
        avg_dir.to_str().unwrap(),
    ]));
    let preds = dataset::read_prediction_dir(&avg_dir).unwrap();
    let original = dataset::read_prediction_dir(&t1).unwrap();
    for (a, b) in preds.iter().zip(original.iter()) {
        for (x, y) in a.np_prob.iter().zip(b.np_prob.iter()) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}

#[test]
fn ensembling_happens_before_postprocessing() {
    // The CLI pipeline is average first, decode second: postprocessing the
    // ensembled directory must reproduce postprocess(average(members)).
    let dir = tmp("ensemble-order");
    let mut rng = Rng::new(13);
    let labels = rect_labels(&mut rng, 2);
    let labels_path = dir.join("labels.npy");
    dataset::write_labels(&labels_path, &labels).unwrap();
    let m1 = dir.join("m1");
    run_ok(bin().args([
        "encode",
        "--labels",
        labels_path.to_str().unwrap(),
        "--out-dir",
        m1.to_str().unwrap(),
    ]));
    // A weaker second model: the same maps with the foreground probability
    // scaled down (still above threshold after averaging).
    let m2 = dir.join("m2");
    let mut weaker = dataset::read_prediction_dir(&m1).unwrap();
    for pred in weaker.iter_mut() {
        pred.np_prob = pred.np_prob.map(|v| v * 0.7);
    }
    dataset::write_prediction_dir(&m2, &weaker).unwrap();

    let avg_dir = dir.join("avg");
    run_ok(bin().args([
        "ensemble",
        "--input",
        m1.to_str().unwrap(),
        "--input",
        m2.to_str().unwrap(),
        "--out-dir",
        avg_dir.to_str().unwrap(),
    ]));
    let decoded_path = dir.join("decoded.npy");
    run_ok(bin().args([
        "postprocess",
        "--pred-dir",
        avg_dir.to_str().unwrap(),
        "--out",
        decoded_path.to_str().unwrap(),
    ]));

    // Library-side reference: postprocess(average(members)), through the
    // same f32 file quantization.
    let strong = dataset::read_prediction_dir(&m1).unwrap();
    let weak = dataset::read_prediction_dir(&m2).unwrap();
    let averaged: Vec<_> = strong
        .iter()
        .zip(weak.iter())
        .map(|(a, b)| {
            nucleitool_core::ensemble::average_predictions(&[a.clone(), b.clone()]).unwrap()
        })
        .collect();
    let ref_dir = dir.join("ref");
    dataset::write_prediction_dir(&ref_dir, &averaged).unwrap();
    let averaged = dataset::read_prediction_dir(&ref_dir).unwrap();
    let expected: Vec<dataset::LabelPair> = averaged
        .iter()
        .map(|p| {
            nucleitool_core::postprocess::postprocess(
                p,
                &nucleitool_core::postprocess::PostprocessParams::default(),
            )
            .to_maps()
        })
        .collect();
    let decoded = dataset::read_labels(&decoded_path).unwrap();
    assert_eq!(decoded, expected);
}

#[test]
fn counts_csv_has_expected_shape() {
    let dir = tmp("counts");
    let mut inst = Grid::filled(16, 16, 0u32);
    let mut cls = Grid::filled(16, 16, ClassId::BACKGROUND);
    // 3 epithelial, 1 plasma.
    for (i, (r0, c0)) in [(1usize, 1usize), (1, 6), (1, 11), (8, 1)]
        .iter()
        .enumerate()
    {
        let class = if i < 3 { 2 } else { 4 };
        for r in *r0..r0 + 3 {
            for c in *c0..c0 + 3 {
                inst.set(r, c, (i + 1) as u32);
                cls.set(r, c, ClassId::new(class).unwrap());
            }
        }
    }
    let path = dir.join("labels.npy");
    dataset::write_labels(&path, &[(inst, cls)]).unwrap();
    let out = run_ok(bin().args(["counts", "--labels", path.to_str().unwrap()]));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        csv,
        "image,neutrophil,epithelial,lymphocyte,plasma,eosinophil,connective\n0,0,3,0,1,0,0\n"
    );
}

#[test]
fn split_reports_lexicographic_folds() {
    let dir = tmp("split");
    let domains = dir.join("domains.txt");
    std::fs::write(&domains, "PanNuke\nGlaS\nCRAG\nCoNSeP\nDigestPath\nGlaS\n").unwrap();
    let out = run_ok(bin().args(["split", "--domains", domains.to_str().unwrap()]));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(
        json["domains"],
        serde_json::json!(["CRAG", "CoNSeP", "DigestPath", "GlaS", "PanNuke"])
    );
    assert_eq!(json["folds"][3], serde_json::json!([1, 5]));
}

#[test]
fn split_with_four_domains_is_a_data_error() {
    let dir = tmp("split-bad");
    let domains = dir.join("domains.txt");
    std::fs::write(&domains, "A\nB\nC\nD\n").unwrap();
    let out = bin()
        .args(["split", "--domains", domains.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("5 distinct domains"));
}

#[test]
fn loss_of_targets_against_themselves_is_tiny() {
    let dir = tmp("loss-self");
    let mut rng = Rng::new(44);
    let labels = rect_labels(&mut rng, 2);
    let labels_path = dir.join("labels.npy");
    dataset::write_labels(&labels_path, &labels).unwrap();
    let target_dir = dir.join("targets");
    run_ok(bin().args([
        "encode",
        "--labels",
        labels_path.to_str().unwrap(),
        "--out-dir",
        target_dir.to_str().unwrap(),
    ]));
    let out = run_ok(bin().args([
        "loss",
        "--pred-dir",
        target_dir.to_str().unwrap(),
        "--target-dir",
        target_dir.to_str().unwrap(),
    ]));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(json["total"].as_f64().unwrap() <= 1e-5);
    for key in [
        "np_ce", "np_dice", "mse_hv", "mse_dg", "gmse_hv", "gmse_dg", "tp_wce", "tp_dice",
    ] {
        assert!(json[key].is_number(), "missing key {key}");
    }
}

#[test]
fn augment_writes_dataset_and_targets_deterministically() {
    let dir = tmp("augment");
    let mut rng = Rng::new(55);
    let labels = rect_labels(&mut rng, 3);
    let images: Vec<Grid<[u8; 3]>> = (0..3)
        .map(|i| Grid::from_fn(96, 96, |r, c| [(r + i) as u8, c as u8, 7]))
        .collect();
    let labels_path = dir.join("labels.npy");
    let images_path = dir.join("images.npy");
    dataset::write_labels(&labels_path, &labels).unwrap();
    dataset::write_images(&images_path, &images).unwrap();

    let out_a = dir.join("out-a");
    let out_b = dir.join("out-b");
    for out_dir in [&out_a, &out_b] {
        run_ok(bin().args([
            "augment",
            "--images",
            images_path.to_str().unwrap(),
            "--labels",
            labels_path.to_str().unwrap(),
            "--seed",
            "7",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]));
    }
    for file in [
        "images.npy",
        "labels.npy",
        "np.npy",
        "hv.npy",
        "dg.npy",
        "tp.npy",
    ] {
        let a = std::fs::read(out_a.join(file)).unwrap();
        let b = std::fs::read(out_b.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs across identical runs");
    }

    // Per-class instance counts survive the augmentation.
    let before = dataset::read_labels(&labels_path).unwrap();
    let after = dataset::read_labels(out_a.join("labels.npy")).unwrap();
    for ((bi, bc), (ai, ac)) in before.iter().zip(after.iter()) {
        let counts = |inst: &Grid<u32>, cls: &Grid<ClassId>| {
            nucleitool_core::instance::extract_instances(inst, cls)
                .unwrap()
                .class_counts()
        };
        assert_eq!(counts(bi, bc), counts(ai, ac));
    }
}

#[test]
fn usage_error_exits_one_and_help_exits_zero() {
    let out = bin().arg("no-such-command").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("encode"));
}

#[test]
fn missing_file_is_a_data_error() {
    let out = bin()
        .args([
            "evaluate",
            "--gt",
            "/nonexistent.npy",
            "--pred",
            "/nonexistent.npy",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn threads_env_var_is_honored() {
    let dir = tmp("threads-env");
    let mut rng = Rng::new(66);
    let labels = rect_labels(&mut rng, 2);
    let path = dir.join("labels.npy");
    dataset::write_labels(&path, &labels).unwrap();
    let out = run_ok(bin().env("NUCLEITOOL_THREADS", "1").args([
        "evaluate",
        "--gt",
        path.to_str().unwrap(),
        "--pred",
        path.to_str().unwrap(),
        "--threads",
        "4",
    ]));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["mpq_plus"], 1.0);
}
