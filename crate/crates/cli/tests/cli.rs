use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ccrf_rerank::graph::{build_knn, pairwise_similarity, reciprocity_affinity};
use ccrf_rerank::io::{write_affinity, write_descriptors, write_ids, write_labels};
use ccrf_rerank::DescriptorSet;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ccrf-rerank"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(p: PathBuf) -> String {
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn write_set(dir: &Path, name: &str, rows: &[Vec<f64>]) -> DescriptorSet {
    let set = DescriptorSet::from_rows(rows).unwrap();
    write_descriptors(&dir.join(name), &set).unwrap();
    set
}

/// Two clusters of 6 items, the first item of each doubling as a query.
fn two_clusters(dir: &Path) -> DescriptorSet {
    let mut rows = Vec::new();
    for c in 0..2 {
        for i in 0..6 {
            let t = 0.03 * i as f64;
            let v = if c == 0 { [1.0, 0.1 + t, 0.1] } else { [0.1, 1.0, 0.1 + t] };
            rows.push(unit(&v));
        }
    }
    let set = write_set(dir, "db.fvecs", &rows);
    write_set(dir, "q.fvecs", &[unit(&[1.0, 0.12, 0.1]), unit(&[0.1, 1.0, 0.13])]);
    write_ids(&dir.join("q.ids"), &["qa".into(), "qb".into()]).unwrap();
    std::fs::write(
        dir.join("gt.json"),
        r#"{"queries":[{"id":"qa","easy":[0,1,2,3,4,5],"hard":[],"junk":[]},{"id":"qb","easy":[6,7,8,9,10,11],"hard":[],"junk":[]}]}"#,
    )
    .unwrap();
    std::fs::write(
        dir.join("run.toml"),
        r#"
[paths]
descriptors = "db.fvecs"
queries = "q.fvecs"
query_ids = "q.ids"
protocol = "gt.json"
output_dir = "out"

[graph]
k = 3
"#,
    )
    .unwrap();
    set
}

#[test]
fn build_graph_matches_in_memory_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let rows = vec![
        unit(&[1.0, 0.1, 0.0]),
        unit(&[0.9, 0.3, 0.1]),
        unit(&[0.1, 1.0, 0.2]),
        unit(&[0.2, 0.8, 0.5]),
    ];
    let set = write_set(dir.path(), "x.fvecs", &rows);
    let stdout = ok(
        dir.path(),
        &["build-graph", "--set", "paths.descriptors=\"x.fvecs\"", "--set", "graph.k=2"],
    );
    assert!(stdout.contains("N = 4"));
    // the file stores f32, so the oracle works on the round-tripped values
    let stored = ccrf_rerank::io::read_descriptors(&dir.path().join("x.fvecs"), None).unwrap();
    assert_eq!(stored.len(), set.len());
    let mut want = Vec::new();
    write_affinity(&mut want, &reciprocity_affinity(&build_knn(&stored, 2, 3.0).unwrap())).unwrap();
    assert_eq!(read(dir.path().join("out/affinity.gra")), String::from_utf8(want).unwrap());
    // brute force over all pairs
    let sim = |i: usize, j: usize| pairwise_similarity(stored.row(i), stored.row(j), 3.0).unwrap();
    let top2 = |i: usize| {
        let mut o: Vec<usize> = (0..4).filter(|&j| j != i).collect();
        o.sort_by(|&a, &b| sim(i, b).total_cmp(&sim(i, a)).then(a.cmp(&b)));
        o.truncate(2);
        o
    };
    let mutual: Vec<(usize, usize)> = (0..4)
        .flat_map(|i| (i + 1..4).map(move |j| (i, j)))
        .filter(|&(i, j)| top2(i).contains(&j) && top2(j).contains(&i))
        .collect();
    let gra = read(dir.path().join("out/affinity.gra"));
    let lines: Vec<&str> = gra.lines().collect();
    assert_eq!(lines[0], format!("GRA1 4 {}", mutual.len()));
    for (line, &(i, j)) in lines[1..].iter().zip(&mutual) {
        let f: Vec<&str> = line.split(' ').collect();
        assert_eq!((f[0].parse::<usize>().unwrap(), f[1].parse::<usize>().unwrap()), (i, j));
        let w: f64 = f[2].parse().unwrap();
        assert!((w - sim(i, j)).abs() < 1e-8);
    }
}

#[test]
fn oversized_k_fails_with_stage_name() {
    let dir = tempfile::tempdir().unwrap();
    write_set(dir.path(), "x.fvecs", &[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.7, 0.7]]);
    let out = run(dir.path(), &["build-graph", "--set", "paths.descriptors=\"x.fvecs\"", "--set", "graph.k=3"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("build-graph"));
}

#[test]
fn malformed_descriptor_file_names_offset() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = 2i32.to_le_bytes().to_vec();
    bytes.extend_from_slice(&1.0f32.to_le_bytes());
    std::fs::write(dir.path().join("bad.fvecs"), bytes).unwrap();
    let out = run(dir.path(), &["build-graph", "--set", "paths.descriptors=\"bad.fvecs\"", "--set", "graph.k=1"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("byte offset 4"), "{err}");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    two_clusters(dir.path());
    let args = ["denoise", "--config", "run.toml", "--set", "ccrf.sigma_d=0.5", "--set", "ccrf.sigma_r=0.05", "--set", "ccrf.clique_size=5"];
    ok(dir.path(), &args);
    let first = (read(dir.path().join("out/affinity.gra")), read(dir.path().join("out/denoise.manifest.toml")));
    ok(dir.path(), &args);
    let second = (read(dir.path().join("out/affinity.gra")), read(dir.path().join("out/denoise.manifest.toml")));
    assert_eq!(first, second);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen-synth", "--set", "synth.n_per_manifold=60", "--set", "synth.noise_sigma=0.08"]);
    let mut snapshots = Vec::new();
    for threads in ["1", "3"] {
        for cmd in ["denoise", "rerank"] {
            let out = bin()
                .current_dir(dir.path())
                .env("RAYON_NUM_THREADS", threads)
                .args([
                    cmd,
                    "--set", "paths.descriptors=\"out/database.fvecs\"",
                    "--set", "paths.queries=\"out/queries.fvecs\"",
                    "--set", "paths.query_ids=\"out/queries.ids\"",
                    "--set", "graph.k=8",
                    "--set", "ccrf.beta=5",
                    "--set", "ccrf.sigma_d=0.085",
                    "--set", "ccrf.sigma_r=3.5e-4",
                    "--set", "ccrf.clique_size=30",
                    "--set", "diffusion.mode=\"offline\"",
                    "--set", "diffusion.trunc=40",
                ])
                .output()
                .unwrap();
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        }
        snapshots.push((read(dir.path().join("out/affinity.gra")), read(dir.path().join("out/rankings.txt"))));
    }
    assert_eq!(snapshots[0], snapshots[1]);
}

#[test]
fn unary_only_denoise_is_symmetrized_top_k() {
    let dir = tempfile::tempdir().unwrap();
    two_clusters(dir.path());
    ok(
        dir.path(),
        &["denoise", "--config", "run.toml", "--set", "ccrf.beta=0", "--set", "ccrf.sigma_d=1", "--set", "ccrf.sigma_r=1", "--set", "ccrf.clique_size=5"],
    );
    let stored = ccrf_rerank::io::read_descriptors(&dir.path().join("db.fvecs"), None).unwrap();
    let knn = build_knn(&stored, 3, 3.0).unwrap();
    let n = stored.len();
    let mut dense = vec![vec![0.0; n]; n];
    for i in 0..n {
        for (&j, &s) in knn.neighbors(i).iter().zip(knn.sims(i)) {
            dense[i][j] = s;
        }
    }
    let gra = read(dir.path().join("out/affinity.gra"));
    let mut count = 0;
    for line in gra.lines().skip(1) {
        let f: Vec<&str> = line.split(' ').collect();
        let (i, j): (usize, usize) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        let w: f64 = f[2].parse().unwrap();
        let want = 0.5 * (dense[i][j] + dense[j][i]);
        assert!((w - want).abs() <= 1e-8 * want, "({i},{j}) {w} vs {want}");
        count += 1;
    }
    let expected = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| dense[i][j] > 0.0 || dense[j][i] > 0.0).count();
    assert_eq!(count, expected);
}

#[test]
fn planted_bridge_manifest_reports_less_cross_weight() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in 0..2 {
        for i in 0..8 {
            let t = 0.02 * i as f64;
            let v = match (c, i) {
                (0, 0) => [0.6, 0.6, 0.2],
                (1, 0) => [0.6, 0.601, 0.2],
                (0, _) => [1.0, 0.2 + t, 0.2],
                _ => [0.2, 1.0, 0.2 + t],
            };
            rows.push(unit(&v));
            labels.push(c);
        }
    }
    write_set(dir.path(), "x.fvecs", &rows);
    write_labels(std::fs::File::create(dir.path().join("labels.txt")).unwrap(), &labels).unwrap();
    let stdout = ok(
        dir.path(),
        &[
            "denoise",
            "--set", "paths.descriptors=\"x.fvecs\"",
            "--set", "paths.labels=\"labels.txt\"",
            "--set", "graph.k=4",
            "--set", "ccrf.beta=1",
            "--set", "ccrf.sigma_d=0.5",
            "--set", "ccrf.sigma_r=0.05",
            "--set", "ccrf.clique_size=8",
        ],
    );
    assert!(stdout.contains("cross-label weight"));
    let manifest: toml::Table = read(dir.path().join("out/denoise.manifest.toml")).parse().unwrap();
    let stats = manifest["stats"].as_table().unwrap();
    let raw = stats["raw_cross_weight"].as_float().unwrap();
    let den = stats["denoised_cross_weight"].as_float().unwrap();
    assert!(raw > 0.0);
    assert!(den < raw, "denoised {den} vs raw {raw}");
    assert!(manifest["inputs"].as_table().unwrap().contains_key("labels.txt"));
    assert_eq!(manifest["config"]["ccrf"]["clique_size"].as_integer(), Some(8));
}

#[test]
fn missing_bandwidth_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    two_clusters(dir.path());
    let out = run(dir.path(), &["denoise", "--config", "run.toml", "--set", "ccrf.sigma_d=0.5", "--set", "ccrf.clique_size=5"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sigma_r"), "{err}");
    let out = run(dir.path(), &["denoise", "--config", "run.toml", "--set", "graph.unknown=1"]);
    assert!(!out.status.success());
}

#[test]
fn singleton_database_gives_one_line() {
    let dir = tempfile::tempdir().unwrap();
    write_set(dir.path(), "x.fvecs", &[vec![0.6, 0.8]]);
    write_set(dir.path(), "q.fvecs", &[vec![1.0, 0.0]]);
    std::fs::write(dir.path().join("a.gra"), "GRA1 1 0\n").unwrap();
    ok(
        dir.path(),
        &["rerank", "--set", "paths.descriptors=\"x.fvecs\"", "--set", "paths.queries=\"q.fvecs\"", "--set", "paths.affinity=\"a.gra\""],
    );
    let r = read(dir.path().join("out/rankings.txt"));
    assert_eq!(r.lines().count(), 1);
    assert!(r.starts_with("0 0 1 "));
}

#[test]
fn offline_full_kernel_file_equals_online() {
    let dir = tempfile::tempdir().unwrap();
    two_clusters(dir.path());
    ok(dir.path(), &["build-graph", "--config", "run.toml"]);
    ok(dir.path(), &["rerank", "--config", "run.toml", "--set", "diffusion.tol=1e-12"]);
    let online = read(dir.path().join("out/rankings.txt"));
    ok(
        dir.path(),
        &["rerank", "--config", "run.toml", "--set", "diffusion.tol=1e-12", "--set", "diffusion.mode=offline", "--set", "diffusion.trunc=12"],
    );
    assert_eq!(online, read(dir.path().join("out/rankings.txt")));
}

#[test]
fn cluster_items_come_first_and_eval_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    two_clusters(dir.path());
    ok(dir.path(), &["build-graph", "--config", "run.toml"]);
    ok(dir.path(), &["rerank", "--config", "run.toml"]);
    let r = read(dir.path().join("out/rankings.txt"));
    let qa: Vec<usize> = r
        .lines()
        .filter(|l| l.starts_with("qa "))
        .map(|l| l.split(' ').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(qa.len(), 12);
    assert!(qa[..6].iter().all(|&i| i < 6), "{qa:?}");
    let stdout = ok(dir.path(), &["eval", "--config", "run.toml"]);
    assert!(stdout.contains("100.00"), "{stdout}");
    assert_eq!(read(dir.path().join("out/eval.txt")), "medium 100.0000\n");
}

#[test]
fn single_point_sweep_equals_eval() {
    let dir = tempfile::tempdir().unwrap();
    two_clusters(dir.path());
    ok(dir.path(), &["build-graph", "--config", "run.toml"]);
    ok(dir.path(), &["rerank", "--config", "run.toml"]);
    ok(dir.path(), &["eval", "--config", "run.toml"]);
    let map = read(dir.path().join("out/eval.txt"));
    ok(
        dir.path(),
        &["sweep", "--config", "run.toml", "--set", "sweep.axis=k", "--set", "sweep.values=[3]", "--set", "sweep.graphs=[\"reciprocity\"]"],
    );
    let dat = read(dir.path().join("out/sweep_k_reciprocity.dat"));
    let point = dat.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(point, format!("3 {}", map.split(' ').nth(1).unwrap().trim()));
}

#[test]
fn gen_synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let files = ["database.fvecs", "queries.fvecs", "protocol.json", "labels.txt", "gen-synth.manifest.toml"];
    ok(dir.path(), &["gen-synth", "--set", "seed=5", "--set", "synth.n_per_manifold=30"]);
    let first: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(dir.path().join("out").join(f)).unwrap()).collect();
    ok(dir.path(), &["gen-synth", "--set", "seed=5", "--set", "synth.n_per_manifold=30"]);
    let second: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(dir.path().join("out").join(f)).unwrap()).collect();
    assert_eq!(first, second);
    ok(dir.path(), &["gen-synth", "--set", "seed=6", "--set", "synth.n_per_manifold=30"]);
    assert_ne!(first[0], std::fs::read(dir.path().join("out/database.fvecs")).unwrap());
}

#[test]
fn ablation_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    two_clusters(dir.path());
    let stdout = ok(
        dir.path(),
        &["ablation", "--config", "run.toml", "--set", "ccrf.sigma_d=0.5", "--set", "ccrf.sigma_r=0.05", "--set", "ccrf.clique_size=5"],
    );
    assert_eq!(stdout.lines().count(), 6);
    assert_eq!(stdout, read(dir.path().join("out/ablation.md")));
}
