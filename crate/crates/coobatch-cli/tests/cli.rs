//! End-to-end checks of the command-line surface: exit codes, file
//! round-trips, and rerun equality.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coobatch"))
}

#[test]
fn missing_input_file_exits_2() {
    let out = bin()
        .args(["train", "--config", "/nonexistent/experiment.conf"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_suite_exits_2() {
    let out = bin().args(["verify", "warp"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_error_exits_2() {
    let out = bin().args(["generate", "--n", "ten"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gradients_suite_passes() {
    let out = bin().args(["verify", "gradients"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("gradients: PASS"), "{text}");
}

#[test]
fn generate_roundtrips_through_the_matrix_format() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    let status = bin()
        .args([
            "generate",
            "--n",
            "40",
            "--blocks",
            "4",
            "--interactions",
            "2000",
            "--seed",
            "9",
            "--out",
        ])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let m = coobatch::data::AssociationMatrix::read_from(&path).unwrap();
    assert_eq!(m.total(), 2000.0);

    // In-memory generation with the same parameters matches the file.
    let direct = coobatch::data::generate_blocks(&coobatch::data::BlocksConfig {
        n: 40,
        blocks: 4,
        interactions: 2000,
        in_block: 0.7,
        seed: 9,
    })
    .unwrap();
    assert_eq!(m.nnz(), direct.nnz());
    for (a, b) in m.entries().iter().zip(direct.entries()) {
        assert_eq!((a.focus, a.context), (b.focus, b.context));
        assert_eq!(a.weight.to_bits(), b.weight.to_bits());
    }
}

#[test]
fn compare_of_identical_trajectories_is_all_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    std::fs::write(
        &csv,
        "# config_hash=0000000000000000\n# seed=1\nupdates,cosine_gap,precision_at_k,seconds\n\
         0,0.0,,0.000\n1000,0.5,,0.000\n2000,1.0,,0.000\n",
    )
    .unwrap();
    let out = bin().arg("compare").arg(&csv).arg(&csv).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let row = text.lines().last().unwrap();
    assert_eq!(row.matches("0.00%").count(), 3, "{text}");
}

#[test]
fn compare_flags_unreached_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("base.csv");
    let method = dir.path().join("method.csv");
    std::fs::write(
        &base,
        "updates,cosine_gap,precision_at_k,seconds\n0,0.0,,0.000\n1000,0.2,,0.000\n",
    )
    .unwrap();
    std::fs::write(
        &method,
        "updates,cosine_gap,precision_at_k,seconds\n0,0.0,,0.000\n1000,1.0,,0.000\n",
    )
    .unwrap();
    let out = bin()
        .arg("compare")
        .arg(&base)
        .arg(&method)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("n/a"), "{text}");
}

#[test]
fn train_writes_checkpoints_and_lsh_pool_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("exp.conf");
    std::fs::write(
        &conf,
        "[data]\nsource = blocks\nn = 60\nblocks = 6\ninteractions = 3000\ninblock = 0.75\nseed = 4\n\
         [eval]\npositives = 100\nnegatives = 100\nseed = 5\nprecision-k = 5\nmin-degree = 5\nrepresentatives = 50\n\
         [train]\ndim = 6\nbatch = 8\nneg = 4\nlr = 0.05\nbias = true\nbudget = 100000\nevals = 5\nseeds = 1\n\
         [lsh]\npool = 4\n\
         [method.lshmix]\nschedule = coo+lsh:jaccard@0, ind@60000\n",
    )
    .unwrap();
    let out_dir = dir.path().join("runs");
    let status = bin()
        .args(["train", "--config"])
        .arg(&conf)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    let model = coobatch::train::read_checkpoint(out_dir.join("lshmix-seed1.ckpt")).unwrap();
    assert_eq!(model.dim(), 6);
    assert!(model.context_bias.is_some());
    let trajectory =
        coobatch::metrics::read_trajectory_csv(out_dir.join("lshmix-seed1.csv")).unwrap();
    assert_eq!(trajectory.seed, 1);
    assert!(trajectory.samples.len() > 1);
    assert!(trajectory
        .samples
        .iter()
        .all(|s| s.precision_at_k.is_some()));

    // The checkpoint feeds angular pools; pools replay through files.
    let matrix_path = dir.path().join("m.txt");
    let status = bin()
        .args([
            "generate",
            "--n",
            "60",
            "--blocks",
            "6",
            "--interactions",
            "3000",
            "--seed",
            "4",
            "--out",
        ])
        .arg(&matrix_path)
        .status()
        .unwrap();
    assert!(status.success());
    for family in ["jaccard", "angular"] {
        let prefix = dir.path().join(format!("pool-{family}"));
        let mut cmd = bin();
        cmd.args(["lsh-pool", "--family", family, "--count", "3", "--out"])
            .arg(&prefix);
        if family == "jaccard" {
            cmd.arg("--matrix").arg(&matrix_path);
        } else {
            cmd.arg("--coarse-checkpoint")
                .arg(out_dir.join("lshmix-seed1.ckpt"));
        }
        let status = cmd.status().unwrap();
        assert!(status.success(), "{family} pool");
        let pool = coobatch::arrange::LshPool::read_from(
            prefix.with_extension("focus.pool"),
            coobatch::arrange::Designation::Focus,
        )
        .unwrap();
        assert_eq!(pool.len(), 3);
        assert_eq!(pool.maps[0].keys.len(), 60);
    }
}

#[test]
fn schedule_flag_replaces_configured_methods() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("exp.conf");
    std::fs::write(
        &conf,
        "[data]\nsource = blocks\nn = 40\nblocks = 4\ninteractions = 1500\ninblock = 0.8\nseed = 1\n\
         [eval]\npositives = 50\nnegatives = 50\nseed = 2\n\
         [train]\ndim = 4\nbatch = 8\nneg = 2\nlr = 0.05\nbudget = 20000\nevals = 4\nseeds = 1\n\
         [method.ind]\nschedule = ind\n\
         [method.coo]\nschedule = coo\n",
    )
    .unwrap();
    let out_dir = dir.path().join("runs");
    let status = bin()
        .args(["train", "--config"])
        .arg(&conf)
        .args(["--schedule", "coo@0, ind@10000", "--out"])
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    // Only the override method ran.
    assert!(out_dir.join("cli-seed1.csv").exists());
    assert!(!out_dir.join("ind-seed1.csv").exists());
    assert!(!out_dir.join("coo-seed1.csv").exists());
}

#[test]
fn select_writes_replayable_selections() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "select",
            "--n",
            "50",
            "--blocks",
            "5",
            "--interactions",
            "6000",
            "--data-seed",
            "2",
            "--t",
            "3",
            "--mode",
            "coordinated",
            "--seeds",
            "7",
            "--budget",
            "50000",
            "--dim",
            "5",
            "--evals",
            "4",
            "--test-pairs",
            "100",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let rows =
        std::fs::read_to_string(dir.path().join("select-coordinated-t3-seed7.rows")).unwrap();
    let header: Vec<usize> = rows
        .lines()
        .next()
        .unwrap()
        .split_whitespace()
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(header, vec![50, 50, 150]); // 50 rows x 3 repetitions
    assert!(dir.path().join("select-coordinated-t3-seed7.csv").exists());
}
