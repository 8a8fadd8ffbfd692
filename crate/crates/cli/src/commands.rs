use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use ccrf_rerank::ccrf::{denoise_database, CcrfParams};
use ccrf_rerank::diffusion::Reranker;
use ccrf_rerank::eval::{
    cross_label_stats, mean_ap, run_ablation, sweep, synth_benchmark, write_plot_data, CrossLabelStats, Protocol,
};
use ccrf_rerank::graph::{build_knn, reciprocity_affinity};
use ccrf_rerank::io;
use ccrf_rerank::{DescriptorSet, RetrievalRanking, SparseAffinity};

use crate::config::RunConfig;
use crate::manifest::Manifest;

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| anyhow!("paths.{key} is not set"))
}

fn output_dir(cfg: &RunConfig) -> Result<&Path> {
    let dir = cfg.paths.output_dir.as_path();
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn affinity_path(cfg: &RunConfig) -> PathBuf {
    cfg.paths
        .affinity
        .clone()
        .unwrap_or_else(|| cfg.paths.output_dir.join("affinity.gra"))
}

fn rankings_path(cfg: &RunConfig) -> PathBuf {
    cfg.paths
        .rankings
        .clone()
        .unwrap_or_else(|| cfg.paths.output_dir.join("rankings.txt"))
}

fn load_set(path: &Path, ids: Option<&Path>, m: &mut Manifest) -> Result<DescriptorSet> {
    m.input(path);
    if let Some(ids) = ids {
        m.input(ids);
    }
    io::read_descriptors(path, ids).with_context(|| format!("reading descriptors {}", path.display()))
}

fn load_database(cfg: &RunConfig, m: &mut Manifest) -> Result<DescriptorSet> {
    let path = required(&cfg.paths.descriptors, "descriptors")?;
    load_set(path, cfg.paths.descriptor_ids.as_deref(), m)
}

fn load_queries(cfg: &RunConfig, m: &mut Manifest) -> Result<DescriptorSet> {
    let path = required(&cfg.paths.queries, "queries")?;
    load_set(path, cfg.paths.query_ids.as_deref(), m)
}

fn load_protocol(cfg: &RunConfig, n: usize, m: &mut Manifest) -> Result<Protocol> {
    let path = required(&cfg.paths.protocol, "protocol")?;
    m.input(path);
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let protocol = Protocol::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))?;
    protocol.validate(n)?;
    Ok(protocol)
}

fn load_labels(path: &Path, n: usize, m: &mut Manifest) -> Result<Vec<usize>> {
    m.input(path);
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let labels = io::read_labels(BufReader::new(file))?;
    if labels.len() != n {
        bail!("{} has {} labels for {n} items", path.display(), labels.len());
    }
    Ok(labels)
}

fn save_affinity(path: &Path, a: &SparseAffinity, m: &mut Manifest) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    io::write_affinity(BufWriter::new(f), a)?;
    m.output(path);
    Ok(())
}

fn report_stats(m: &mut Manifest, prefix: &str, s: &CrossLabelStats) {
    m.count(&format!("{prefix}_edges"), s.edges);
    m.count(&format!("{prefix}_cross_edges"), s.cross_edges);
    m.stat(&format!("{prefix}_weight"), s.weight);
    m.stat(&format!("{prefix}_cross_weight"), s.cross_weight);
}

pub fn build_graph(cfg: &RunConfig) -> Result<()> {
    let mut m = Manifest::default();
    output_dir(cfg)?;
    let x = load_database(cfg, &mut m)?;
    let start = Instant::now();
    let a = reciprocity_affinity(&build_knn(&x, cfg.graph.k, cfg.graph.gamma)?);
    let out = affinity_path(cfg);
    save_affinity(&out, &a, &mut m)?;
    m.count("n", a.n());
    m.count("nnz", a.nnz());
    m.write("build-graph", cfg)?;
    println!("N = {}, nnz = {}", a.n(), a.nnz());
    eprintln!("build-graph: {:.3}s", start.elapsed().as_secs_f64());
    Ok(())
}

pub fn denoise(cfg: &RunConfig) -> Result<()> {
    let params = cfg.ccrf_params()?;
    let clique = cfg.ccrf()?.clique_size;
    let k_out = cfg.k_out()?;
    let mut m = Manifest::default();
    output_dir(cfg)?;
    let x = load_database(cfg, &mut m)?;
    let labels = cfg
        .paths
        .labels
        .as_deref()
        .map(|p| load_labels(p, x.len(), &mut m))
        .transpose()?;
    let start = Instant::now();
    let a = denoise_database(&x, clique, &params, k_out)?;
    eprintln!("denoise: {:.3}s", start.elapsed().as_secs_f64());
    let out = affinity_path(cfg);
    save_affinity(&out, &a, &mut m)?;
    m.count("n", a.n());
    m.count("nnz", a.nnz());
    if let Some(labels) = labels {
        // same top-k selection on the raw similarities, for comparison
        let raw = denoise_database(&x, clique, &CcrfParams { beta: 0.0, ..params }, k_out)?;
        let before = cross_label_stats(&raw, &labels);
        let after = cross_label_stats(&a, &labels);
        report_stats(&mut m, "raw", &before);
        report_stats(&mut m, "denoised", &after);
        println!(
            "cross-label weight: raw {:.6} -> denoised {:.6} ({} -> {} edges)",
            before.cross_weight, after.cross_weight, before.cross_edges, after.cross_edges
        );
    }
    m.write("denoise", cfg)?;
    println!("N = {}, nnz = {}", a.n(), a.nnz());
    Ok(())
}

pub fn rerank(cfg: &RunConfig) -> Result<()> {
    let mut m = Manifest::default();
    output_dir(cfg)?;
    let x = load_database(cfg, &mut m)?;
    let queries = load_queries(cfg, &mut m)?;
    let apath = affinity_path(cfg);
    m.input(&apath);
    let file = File::open(&apath).with_context(|| format!("opening affinity {}", apath.display()))?;
    let a = io::read_affinity(BufReader::new(file)).with_context(|| format!("parsing {}", apath.display()))?;
    let start = Instant::now();
    let query_k = cfg.diffusion.query_k.unwrap_or(cfg.graph.k).min(x.len());
    let reranker = Reranker::new(&x, &a, cfg.diffusion_params(), query_k, cfg.graph.gamma)?;
    let rankings = reranker.rank_all(&queries)?;
    eprintln!("rerank: {:.3}s for {} queries", start.elapsed().as_secs_f64(), queries.len());
    let out = rankings_path(cfg);
    let f = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
    io::write_rankings(BufWriter::new(f), queries.ids(), x.ids(), &rankings, cfg.diffusion.top)?;
    m.output(&out);
    m.count("queries", queries.len());
    m.write("rerank", cfg)?;
    Ok(())
}

pub fn eval(cfg: &RunConfig) -> Result<()> {
    let mut m = Manifest::default();
    output_dir(cfg)?;
    let ids = match &cfg.paths.descriptor_ids {
        Some(p) => {
            m.input(p);
            io::read_ids(p)?
        }
        None => load_database(cfg, &mut m)?.ids().to_vec(),
    };
    let protocol = load_protocol(cfg, ids.len(), &mut m)?;
    let rpath = rankings_path(cfg);
    m.input(&rpath);
    let file = File::open(&rpath).with_context(|| format!("opening rankings {}", rpath.display()))?;
    let grouped = io::rankings_from_records(&io::read_rankings(BufReader::new(file))?, &ids)?;
    let rankings: Vec<RetrievalRanking> = protocol
        .queries
        .iter()
        .map(|q| {
            grouped
                .iter()
                .find(|(id, _)| *id == q.id)
                .map(|(_, r)| r.clone())
                .ok_or_else(|| anyhow!("no ranking for query {:?}", q.id))
        })
        .collect::<Result<_>>()?;
    let mode = cfg.eval.protocol_mode;
    let map = mean_ap(&rankings, &protocol, mode)?;
    m.stat("mode", mode.name());
    m.stat("map", map);
    let report = cfg.paths.output_dir.join("eval.txt");
    std::fs::write(&report, format!("{mode} {map:.4}\n"))?;
    m.output(&report);
    m.write("eval", cfg)?;
    println!("mAP ({mode}) = {map:.2}");
    Ok(())
}

pub fn sweep_cmd(cfg: &RunConfig) -> Result<()> {
    let s = cfg.sweep.as_ref().ok_or_else(|| anyhow!("missing [sweep] section"))?;
    let mut m = Manifest::default();
    let dir = output_dir(cfg)?.to_path_buf();
    let x = load_database(cfg, &mut m)?;
    let queries = load_queries(cfg, &mut m)?;
    let protocol = load_protocol(cfg, x.len(), &mut m)?;
    for &kind in &s.graphs {
        let start = Instant::now();
        let pipeline = cfg.pipeline(kind)?;
        let result = sweep(s.axis, &s.values, &pipeline, &x, &queries, &protocol, cfg.eval.protocol_mode)?;
        eprintln!("sweep {}: {:.3}s", kind.name(), start.elapsed().as_secs_f64());
        for (v, e) in &result.errors {
            eprintln!("sweep {} {}={v}: {e}", kind.name(), s.axis.name());
        }
        let out = dir.join(format!("sweep_{}_{}.dat", s.axis.name(), kind.name()));
        let f = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
        write_plot_data(BufWriter::new(f), &result)?;
        m.output(&out);
        for (v, map) in &result.points {
            println!("{} {}={v} mAP {map:.2}", kind.name(), s.axis.name());
        }
        m.count(&format!("{}_failed_points", kind.name()), result.errors.len());
    }
    m.write("sweep", cfg)?;
    Ok(())
}

pub fn gen_synth(cfg: &RunConfig) -> Result<()> {
    let dir = output_dir(cfg)?.to_path_buf();
    let mut m = Manifest::default();
    let b = synth_benchmark(&cfg.synth())?;
    let files = [
        ("database.fvecs", &b.database.descriptors, "database.ids"),
        ("queries.fvecs", &b.queries.descriptors, "queries.ids"),
    ];
    for (vec_name, set, id_name) in files {
        let p = dir.join(vec_name);
        io::write_descriptors(&p, set)?;
        m.output(&p);
        let p = dir.join(id_name);
        io::write_ids(&p, set.ids())?;
        m.output(&p);
    }
    let p = dir.join("protocol.json");
    b.protocol.to_writer(BufWriter::new(File::create(&p)?))?;
    m.output(&p);
    let p = dir.join("labels.txt");
    io::write_labels(BufWriter::new(File::create(&p)?), &b.database.labels)?;
    m.output(&p);
    m.count("database", b.database.descriptors.len());
    m.count("queries", b.queries.descriptors.len());
    m.write("gen-synth", cfg)?;
    println!(
        "wrote {} database items and {} queries to {}",
        b.database.descriptors.len(),
        b.queries.descriptors.len(),
        dir.display()
    );
    Ok(())
}

pub fn ablation(cfg: &RunConfig) -> Result<()> {
    let mut m = Manifest::default();
    let dir = output_dir(cfg)?.to_path_buf();
    let x = load_database(cfg, &mut m)?;
    let queries = load_queries(cfg, &mut m)?;
    let protocol = load_protocol(cfg, x.len(), &mut m)?;
    let pipeline = cfg.pipeline(crate::config::GraphKind::Denoised)?;
    let start = Instant::now();
    let table = run_ablation(&x, &queries, &protocol, cfg.eval.protocol_mode, &pipeline)?;
    eprintln!("ablation: {:.3}s", start.elapsed().as_secs_f64());
    let rendered = table.render();
    let out = dir.join("ablation.md");
    std::fs::write(&out, &rendered)?;
    m.output(&out);
    m.write("ablation", cfg)?;
    print!("{rendered}");
    Ok(())
}
