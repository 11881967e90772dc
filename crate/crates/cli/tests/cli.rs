use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use poresim::geometry::synthetic::SyntheticGeometry;
use poresim::grid::channels;
use poresim::grid::snapshot::decode_grid;
use poresim::io::mask::write_raw_mask;
use poresim::io::vtk::parse_vtk;
use poresim::{DenseField, NodeIndex, SparseBlockGrid};
use serde_json::{json, Value};
use tempfile::TempDir;

fn poresim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poresim"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

/// 16^3 voxel ball of radius 5 centred on voxel (8, 8, 8).
fn ball_mask(dir: &Path) -> PathBuf {
    let m = SyntheticGeometry::Ball {
        center: [8.5; 3],
        radius: 5.0,
    }
    .mask(&[16, 16, 16], &[1.0; 3])
    .unwrap();
    let p = dir.join("ball.raw");
    write_raw_mask(&p, &m).unwrap();
    p
}

fn packing_config(n_steps: usize) -> Value {
    json!({
        "input": {"format": "synthetic", "size": [24, 24, 24],
                  "geometry": {"kind": "sphere_packing", "count": 12, "radius": 3.5, "min_gap": 1.0, "seed": 7}},
        "diffusion": {"uniform": null, "d_min": 0.1, "d_max": 1.0},
        "initial_condition": {"kind": "ball", "center": [12, 12, 12], "radius": 6, "inside": 1.0},
        "simulation": {"n_steps": n_steps, "record_every": 10},
        "outputs": {"dir": "run"}
    })
}

#[test]
fn redistance_ball_center_matches_radius() {
    let t = TempDir::new().unwrap();
    let mask = ball_mask(t.path());
    let o = poresim(
        t.path(),
        &["redistance", "-i", mask.to_str().unwrap(), "-o", "sdf.dfld"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sdf: DenseField<f64> =
        DenseField::decode(&fs::read(t.path().join("sdf.dfld")).unwrap()).unwrap();
    let center = sdf.get([8, 8, 8]);
    assert!((center - 5.0).abs() <= 2.0, "center {center}");
    let diag: Value =
        serde_json::from_str(&fs::read_to_string(t.path().join("sdf.json")).unwrap()).unwrap();
    assert_eq!(diag["converged"], json!(true));
    assert!(diag["iterations"].as_u64().unwrap() > 1);
}

#[test]
fn redistance_rerun_on_own_output_is_a_fixed_point() {
    let t = TempDir::new().unwrap();
    let mask = ball_mask(t.path());
    assert_eq!(
        code(&poresim(
            t.path(),
            &["redistance", "-i", mask.to_str().unwrap(), "-o", "a.dfld"]
        )),
        0
    );
    let o = poresim(
        t.path(),
        &["redistance", "-i", "a.dfld", "--assume-sdf", "-o", "b.dfld"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let iterations = stdout_json(&o)["iterations"].as_u64().unwrap();
    assert!(iterations <= 2, "{iterations}");
}

#[test]
fn redistance_single_phase_mask_is_rejected() {
    let t = TempDir::new().unwrap();
    let m = poresim::geometry::VoxelMask::new(&[8, 8, 8], &[1.0; 3], vec![true; 512]).unwrap();
    write_raw_mask(&t.path().join("full.raw"), &m).unwrap();
    let o = poresim(t.path(), &["redistance", "-i", "full.raw"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no interface found"), "{}", stderr(&o));
}

#[test]
fn malformed_sidecar_names_the_field() {
    let t = TempDir::new().unwrap();
    let mask = ball_mask(t.path());
    fs::write(
        t.path().join("ball.json"),
        r#"{"size": [16, 16, 16], "voxel_size": [1.0, 1.0]}"#,
    )
    .unwrap();
    let o = poresim(t.path(), &["redistance", "-i", mask.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("voxel_size"), "{}", stderr(&o));
    fs::write(
        t.path().join("ball.json"),
        r#"{"size": [16, 16, 16], "voxel_size": [1, 1, 1], "axis_order": "zyq"}"#,
    )
    .unwrap();
    let o = poresim(t.path(), &["redistance", "-i", mask.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("axis_order"), "{}", stderr(&o));
}

#[test]
fn simulate_conserves_mass_and_writes_outputs() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "cfg.json", &packing_config(200));
    let o = poresim(
        t.path(),
        &[
            "simulate",
            "-c",
            cfg.to_str().unwrap(),
            "--set",
            "outputs.vtk_every=100",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = stdout_json(&o);
    assert!(summary["relative_mass_drift"].as_f64().unwrap().abs() <= 200.0 * 1e-12);

    let csv = fs::read_to_string(t.path().join("run/mass.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("step,time,total_mass,min_u,max_u"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 21);
    assert_eq!(rows.last().unwrap()[0], 200.0);
    let m0 = rows[0][2];
    for r in &rows {
        assert!(((r[2] - m0) / m0).abs() <= 1e-10, "{r:?}");
        assert!(r[3] >= 0.0 && r[4] <= 1.0);
    }

    // VTK of the last step holds the same u as the final snapshot
    let grid: SparseBlockGrid<f64> =
        decode_grid(&fs::read(t.path().join("run/final.sbgr")).unwrap()).unwrap();
    let vtk =
        parse_vtk(&fs::read_to_string(t.path().join("run/state_000200.vtk")).unwrap()).unwrap();
    let u = grid.property(channels::U).unwrap();
    let (ua, mask) = (vtk.array("u").unwrap(), vtk.array("active").unwrap());
    assert!(vtk.array("D").is_some() && vtk.array("phi").is_some());
    for idx in grid.geometry().indices() {
        let p = vtk.point(idx.0);
        match grid.value(idx, u) {
            Some(v) => {
                assert_eq!(ua[p], v);
                assert_eq!(mask[p], 1.0);
            }
            None => {
                assert!(ua[p].is_nan());
                assert_eq!(mask[p], 0.0);
            }
        }
    }
    assert!(t.path().join("run/state_000000.vtk").exists());
    assert!(t.path().join("run/state_000100.vtk").exists());
}

#[test]
fn unstable_dt_exits_with_bound() {
    let t = TempDir::new().unwrap();
    let mut v = packing_config(10);
    v["diffusion"] = json!({"uniform": 1.0});
    // 3D, h = 1, D = 1: bound 1/6
    v["simulation"]["dt"] = json!(10.0 / 6.0);
    let cfg = write_config(t.path(), "cfg.json", &v);
    let o = poresim(t.path(), &["simulate", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(
        stderr(&o).contains(&format!("{:e}", 1.0f64 / 6.0)),
        "{}",
        stderr(&o)
    );
    let o = poresim(
        t.path(),
        &[
            "simulate",
            "-c",
            cfg.to_str().unwrap(),
            "--force-dt",
            "--steps",
            "1",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn blow_up_exits_numerical() {
    let t = TempDir::new().unwrap();
    let mut v = packing_config(3000);
    v["diffusion"] = json!({"uniform": 1.0});
    v["simulation"]["dt"] = json!(1.0);
    v["simulation"]["record_every"] = json!(1000);
    let cfg = write_config(t.path(), "cfg.json", &v);
    let o = poresim(
        t.path(),
        &["simulate", "-c", cfg.to_str().unwrap(), "--force-dt"],
    );
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("non-finite"));
}

#[test]
fn zero_steps_writes_initial_state_only() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "cfg.json", &packing_config(50));
    let o = poresim(
        t.path(),
        &[
            "simulate",
            "-c",
            cfg.to_str().unwrap(),
            "--steps",
            "0",
            "--set",
            "outputs.vtk_every=10",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(t.path().join("run/mass.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("0,0,"));
    let vtks: Vec<_> = fs::read_dir(t.path().join("run"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "vtk"))
        .collect();
    assert_eq!(vtks.len(), 1);
    let grid: SparseBlockGrid<f64> =
        decode_grid(&fs::read(t.path().join("run/final.sbgr")).unwrap()).unwrap();
    let u = grid.property(channels::U).unwrap();
    assert_eq!(grid.value(NodeIndex([12, 12, 12]), u).unwrap_or(1.0), 1.0);
}

#[test]
fn identical_runs_give_identical_csv() {
    let t = TempDir::new().unwrap();
    let mut v = packing_config(60);
    v["outputs"]["dir"] = json!("a");
    let a = write_config(t.path(), "a.json", &v);
    v["outputs"]["dir"] = json!("b");
    let b = write_config(t.path(), "b.json", &v);
    assert_eq!(
        code(&poresim(t.path(), &["simulate", "-c", a.to_str().unwrap()])),
        0
    );
    assert_eq!(
        code(&poresim(t.path(), &["simulate", "-c", b.to_str().unwrap()])),
        0
    );
    assert_eq!(
        fs::read(t.path().join("a/mass.csv")).unwrap(),
        fs::read(t.path().join("b/mass.csv")).unwrap()
    );
}

#[test]
fn frap_box_against_box_recovers_identity() {
    let t = TempDir::new().unwrap();
    let v = json!({
        "input": {"format": "synthetic", "geometry": {"kind": "open"}, "size": [32, 32]},
        "frap": {"d_molecular": 1.0, "schedule": {"t_end": 60.0, "samples": 60}},
        "outputs": {"dir": "frap"}
    });
    let cfg = write_config(t.path(), "cfg.json", &v);
    let o = poresim(t.path(), &["frap", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = stdout_json(&o);
    let tau = r["tau_d"].as_f64().unwrap();
    assert!((tau - 1.0).abs() <= 0.01, "{tau}");
    assert_eq!(r["porosity"].as_f64().unwrap(), 1.0);
    let csv = fs::read_to_string(t.path().join("frap/frap_recovery.csv")).unwrap();
    assert!(csv.starts_with("time,recovery_fraction\n0,0\n"));
    assert!(t.path().join("frap/tortuosity.json").exists());
}

#[test]
fn frap_bleach_box_outside_phase_is_rejected() {
    let t = TempDir::new().unwrap();
    let v = json!({
        "input": {"format": "synthetic", "geometry": {"kind": "ball", "center": [8, 8, 0], "radius": 4}, "size": [16, 16]},
        "frap": {"region": {"lower": [0, 0, 0], "upper": [2, 2, 1]}, "schedule": {"t_end": 5.0}}
    });
    let cfg = write_config(t.path(), "cfg.json", &v);
    let o = poresim(t.path(), &["frap", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("frap.region"), "{}", stderr(&o));
}

#[test]
fn verify_disk_writes_report_and_verdict() {
    let t = TempDir::new().unwrap();
    let o = poresim(
        t.path(),
        &["verify", "--case", "disk", "--resolutions", "32,64,128"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(t.path().join("out/verify_disk2d.json")).unwrap())
            .unwrap();
    let l2 = report["fitted_slopes"]["l2"].as_f64().unwrap();
    let linf = report["fitted_slopes"]["linf"].as_f64().unwrap();
    assert!((linf - 1.5).abs() < 0.15, "{linf}");
    let pass = (1.2..=1.8).contains(&l2) && (1.2..=1.8).contains(&linf);
    let line = String::from_utf8_lossy(&o.stdout);
    assert!(line.contains(if pass { "PASS" } else { "FAIL" }), "{line}");
    assert!(t.path().join("out/verify_disk2d_l2.csv").exists());
    assert!(t.path().join("out/verify_disk2d_linf.csv").exists());
}

#[test]
fn build_grid_and_stats_agree() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "cfg.json", &packing_config(1));
    let o = poresim(
        t.path(),
        &["build-grid", "-c", cfg.to_str().unwrap(), "-o", "g.sbgr"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let built = stdout_json(&o);
    let o = poresim(t.path(), &["stats", "-i", "g.sbgr"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = stdout_json(&o);
    assert_eq!(s["active_node_count"], built["active_node_count"]);
    assert_eq!(s["sparse_snapshot_bytes"], built["sparse_snapshot_bytes"]);
    assert!(s["fill_fraction"].as_f64().unwrap() < 1.0);
}

#[test]
fn invalid_configs_exit_with_input_code() {
    let t = TempDir::new().unwrap();
    let cases = [
        json!({"input": {"format": "raw", "path": "missing.raw"}}),
        json!({"simulation": {"n_steps": 5, "bogus": 1}}),
        json!({"phase_band": {"low": 1.0, "high": 0.5}, "input": {"format": "synthetic", "geometry": {"kind": "open"}, "size": [8, 8]}}),
        json!({"simulation": {"n_steps": 5, "reaction": {"kind": "surface_sink", "rate": -1}}}),
    ];
    for (i, v) in cases.iter().enumerate() {
        let cfg = write_config(t.path(), &format!("c{i}.json"), v);
        let o = poresim(t.path(), &["simulate", "-c", cfg.to_str().unwrap()]);
        assert_eq!(code(&o), 2, "case {i}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error: "), "case {i}");
    }
    let o = poresim(t.path(), &["stats", "--set", "input"]);
    assert_eq!(code(&o), 2);
    let o = poresim(t.path(), &["stats", "--config", "nope.json"]);
    assert_eq!(code(&o), 2);
    let o = poresim(t.path(), &["frobnicate"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn thread_cap_is_validated() {
    let t = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_poresim"))
        .current_dir(t.path())
        .env("RD_THREADS", "0")
        .args(["verify", "--resolutions", "32"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_poresim"))
        .current_dir(t.path())
        .env("RD_THREADS", "2")
        .args([
            "stats",
            "--set",
            r#"input={"format":"synthetic","geometry":{"kind":"open"},"size":[8,8]}"#,
        ])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}
