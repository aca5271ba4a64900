//! Acceptance gate for the whole toolkit. Each test checks one numbered
//! contract and prints a single `ACCEPTANCE NN <name>: PASS/FAIL` line; run
//!
//! ```text
//! cargo test -p turboreg-cli --test acceptance -- --nocapture --test-threads=1
//! ```
//!
//! to see the lines in order. The criteria still fail the build as ordinary
//! tests when a contract is violated.

use std::collections::BTreeSet;
use std::panic::AssertUnwindSafe;
use std::process::Command;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use turboreg_cli::document::ResultDocument;
use turboreg_core::{
    brute_force_3cliques, build_first_order, build_sc2, estimate, generate, kabsch, median,
    pgs_search, ransac_baseline, rotation_error, to_o2graph, translation_error, CompatGraph,
    Error, EstimatorParams, Point3, RigidTransform, SynthConfig, SynthInstance,
};

/// Criteria run one at a time so the wall-clock bounds below measure the
/// criterion alone rather than whatever the test scheduler put on the other
/// cores.
static SERIAL: Mutex<()> = Mutex::new(());

fn criterion<F>(num: u32, name: &str, body: F)
where
    F: FnOnce() -> String,
{
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    match std::panic::catch_unwind(AssertUnwindSafe(body)) {
        Ok(detail) => println!("ACCEPTANCE {num:02} {name}: PASS ({detail})"),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| payload.downcast_ref::<&str>().copied())
                .unwrap_or("panicked");
            println!("ACCEPTANCE {num:02} {name}: FAIL ({msg})");
            std::panic::resume_unwind(payload);
        }
    }
}

/// 50 seeded random graphs with 6..=100 nodes, edge densities cycling
/// through 0.05, 0.2, 0.5. Deterministic, so every criterion that mentions
/// "the same 50 graphs" can rebuild them.
fn graph_corpus() -> Vec<CompatGraph> {
    let densities = [0.05, 0.2, 0.5];
    let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_c0de);
    (0..50)
        .map(|round| {
            let n = rng.gen_range(6..=100);
            let p = densities[round % 3];
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen_bool(p) {
                        edges.push((i, j));
                    }
                }
            }
            CompatGraph::from_edges(n, &edges).unwrap()
        })
        .collect()
}

/// Cubic-time reference: triangle count through every edge plus the set of
/// triangles, straight off the adjacency matrix.
fn triangle_oracle(g: &CompatGraph) -> (Vec<Vec<u32>>, BTreeSet<[usize; 3]>) {
    let n = g.n();
    let mut per_edge = vec![vec![0u32; n]; n];
    let mut triples = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            if !g.contains(i, j) {
                continue;
            }
            for k in j + 1..n {
                if g.contains(i, k) && g.contains(j, k) {
                    triples.insert([i, j, k]);
                    for &(a, b) in &[(i, j), (i, k), (j, k)] {
                        per_edge[a][b] += 1;
                        per_edge[b][a] += 1;
                    }
                }
            }
        }
    }
    (per_edge, triples)
}

/// 7-node fixture: complete on {0..4} plus the 4-clique {1,3,5,6}. 15 edges,
/// 14 triangles.
fn fixture() -> CompatGraph {
    let mut edges = Vec::new();
    for i in 0..5usize {
        for j in i + 1..5 {
            edges.push((i, j));
        }
    }
    edges.extend_from_slice(&[(1, 5), (1, 6), (3, 5), (3, 6), (5, 6)]);
    CompatGraph::from_edges(7, &edges).unwrap()
}

fn clique_set(g: &CompatGraph) -> BTreeSet<[usize; 3]> {
    brute_force_3cliques(g).unwrap().iter().map(|c| c.nodes).collect()
}

/// Relative rotation angle via the quaternion, which stays meaningful below
/// the ~1e-6 degree floor where the trace-based arccos quantizes.
fn quat_angle_deg(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let rel = Rotation3::from_matrix_unchecked(a.transpose() * b);
    UnitQuaternion::from_rotation_matrix(&rel).angle().to_degrees()
}

#[test]
fn c01_sc2_weight_oracle() {
    criterion(1, "sc2-weight-oracle", || {
        let start = Instant::now();
        let mut triangles = 0usize;
        for (idx, g) in graph_corpus().iter().enumerate() {
            let w = build_sc2(g);
            let (per_edge, triples) = triangle_oracle(g);
            for i in 0..g.n() {
                for j in 0..g.n() {
                    assert_eq!(w.weight(i, j), per_edge[i][j], "graph {idx}, weight ({i},{j})");
                }
            }
            triangles += triples.len();
        }
        let secs = start.elapsed().as_secs_f64();
        assert!(secs < 10.0, "took {secs:.1} s, budget 10 s");
        format!("50 graphs, {triangles} triangles, all weights exact, {secs:.2} s")
    });
}

#[test]
fn c02_unique_assignment() {
    criterion(2, "unique-assignment", || {
        let start = Instant::now();
        let mut graphs = graph_corpus();
        graphs.push(fixture());
        let last = graphs.len() - 1;
        let mut matched = 0usize;
        let mut fixture_cliques = 0usize;
        for (idx, g) in graphs.iter().enumerate() {
            let o2 = to_o2graph(&build_sc2(g)).unwrap();
            let out = pgs_search(&o2, o2.positive_edge_count().max(1), g.n()).unwrap();
            let got: Vec<[usize; 3]> = out.cliques.iter().map(|c| c.nodes).collect();
            let set: BTreeSet<[usize; 3]> = got.iter().copied().collect();
            assert_eq!(set.len(), got.len(), "graph {idx}: duplicate cliques at full budget");
            assert_eq!(set, clique_set(g), "graph {idx}: clique sets differ from brute force");
            if idx == last {
                fixture_cliques = set.len();
            }
            matched += set.len();
        }
        assert_eq!(fixture_cliques, 14, "fixture clique count");
        let secs = start.elapsed().as_secs_f64();
        assert!(secs < 10.0, "took {secs:.1} s, budget 10 s");
        format!("{matched} cliques matched across 51 graphs, fixture has 14, {secs:.2} s")
    });
}

#[test]
fn c03_redundancy_contrast() {
    criterion(3, "redundancy-contrast", || {
        // A triangle can only be emitted under its own three edges, each
        // expanded at most once at full budget, so set equality with the
        // brute force plus raw_len == 3x the set size pins the pre-dedup
        // multiplicity at exactly 3 per triangle.
        for (idx, g) in graph_corpus().iter().enumerate() {
            let w = build_sc2(g);
            let out = pgs_search(&w, w.positive_edge_count().max(1), g.n()).unwrap();
            let got: BTreeSet<[usize; 3]> = out.cliques.iter().map(|c| c.nodes).collect();
            assert_eq!(got.len(), out.cliques.len(), "graph {idx}: duplicates survived dedup");
            assert_eq!(got, clique_set(g), "graph {idx}: clique sets differ from brute force");
            assert_eq!(out.raw_len, 3 * got.len(), "graph {idx}: pre-dedup multiplicity");
        }
        "every triangle selected exactly 3 times pre-dedup on 50 graphs".to_string()
    });
}

#[test]
fn c04_kabsch_recovery() {
    criterion(4, "kabsch-recovery", || {
        let start = Instant::now();
        let mut rng = ChaCha12Rng::seed_from_u64(0xace4);
        let mut max_re = 0.0f64;
        let mut max_te = 0.0f64;
        for trial in 0..1000 {
            let config = SynthConfig {
                n: rng.gen_range(3..=50),
                outlier_ratio: 0.0,
                noise_sigma: 0.0,
                extent: 1.0,
                seed: rng.gen(),
            };
            let inst = generate(&config).unwrap();
            let (src, tgt): (Vec<Point3>, Vec<Point3>) =
                inst.correspondences.iter().map(|c| (c.source, c.target)).unzip();
            let t = kabsch(&src, &tgt).unwrap();
            let re = quat_angle_deg(t.rotation(), inst.gt.rotation());
            let te = translation_error(t.translation(), inst.gt.translation());
            assert!(re < 1e-6, "trial {trial}: rotation error {re} deg");
            assert!(te < 1e-9, "trial {trial}: translation error {te} m");
            max_re = max_re.max(re);
            max_te = max_te.max(te);
        }
        // Collinear and coincident sources must be reported, not fitted.
        for k in 0..20u64 {
            let gt = generate(&SynthConfig {
                n: 3,
                outlier_ratio: 0.0,
                noise_sigma: 0.0,
                extent: 1.0,
                seed: 9000 + k,
            })
            .unwrap()
            .gt;
            let mut line = ChaCha12Rng::seed_from_u64(7700 + k);
            let base = Point3::new(
                line.gen_range(-1.0..1.0),
                line.gen_range(-1.0..1.0),
                line.gen_range(-1.0..1.0),
            );
            let dir = [
                line.gen_range(-1.0..1.0),
                line.gen_range(-1.0..1.0),
                line.gen_range(-1.0..1.0),
            ];
            let src: Vec<Point3> = [0.0, 0.3, 1.1, 2.7]
                .iter()
                .map(|t| Point3::new(base.x + t * dir[0], base.y + t * dir[1], base.z + t * dir[2]))
                .collect();
            let tgt: Vec<Point3> = src.iter().map(|&p| gt.apply(p)).collect();
            let err = kabsch(&src, &tgt).unwrap_err();
            assert!(
                matches!(err, Error::DegenerateConfiguration { .. }),
                "collinear set {k} gave {err:?}"
            );
        }
        let src = vec![Point3::new(0.25, -0.5, 0.75); 3];
        let err = kabsch(&src, &src).unwrap_err();
        assert!(matches!(err, Error::DegenerateConfiguration { .. }), "coincident set gave {err:?}");
        let secs = start.elapsed().as_secs_f64();
        assert!(secs < 5.0, "took {secs:.1} s, budget 5 s");
        format!("1000 exact recoveries (max RE {max_re:.1e} deg, max TE {max_te:.1e} m), 21 degenerate sets rejected, {secs:.2} s")
    });
}

struct SeedRow {
    success: bool,
    hypotheses: usize,
    ransac_success: bool,
    doc_single: String,
    doc_eight: String,
}

struct Shared {
    rows: Vec<SeedRow>,
    single_elapsed_s: f64,
}

static SHARED: OnceLock<Shared> = OnceLock::new();

fn succeeded(t: &RigidTransform, gt: &RigidTransform) -> bool {
    let re = rotation_error(t.rotation(), gt.rotation()).unwrap();
    let te = translation_error(t.translation(), gt.translation());
    re <= 2.0 && te <= 0.03
}

/// The 100-seed sweep behind criteria 5, 6, 9, and 10: n = 1000, 90%
/// outliers, sigma = 0.005 m, extent 1 m, tau = 0.0125 m, inlier threshold
/// = 3 sigma. Solved once on a 1-thread pool (timed) and once on an 8-thread
/// pool, with a 2000-iteration RANSAC run per seed for the baseline.
fn shared() -> &'static Shared {
    SHARED.get_or_init(|| {
        let mut params = EstimatorParams::new(0.0125);
        params.inlier_threshold = 0.015;

        let instances: Vec<SynthInstance> = (0..100)
            .map(|seed| {
                generate(&SynthConfig {
                    n: 1000,
                    outlier_ratio: 0.90,
                    noise_sigma: 0.005,
                    extent: 1.0,
                    seed,
                })
                .unwrap()
            })
            .collect();

        let pool = |threads: usize| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
        };
        let solve_all = || -> Vec<_> {
            instances.iter().map(|inst| estimate(&inst.correspondences, &params).unwrap()).collect()
        };

        let start = Instant::now();
        let single = pool(1).install(solve_all);
        let single_elapsed_s = start.elapsed().as_secs_f64();
        let eight = pool(8).install(solve_all);

        let rows = instances
            .iter()
            .zip(single.iter().zip(eight.iter()))
            .enumerate()
            .map(|(seed, (inst, (r1, r8)))| SeedRow {
                success: succeeded(&r1.best_transform, &inst.gt),
                hypotheses: r1.hypotheses_evaluated,
                ransac_success: ransac_baseline(&inst.correspondences, 2000, 0.015, seed as u64)
                    .map(|r| succeeded(&r.best_transform, &inst.gt))
                    .unwrap_or(false),
                doc_single: ResultDocument::from_result(r1, &params, true).to_json(),
                doc_eight: ResultDocument::from_result(r8, &params, true).to_json(),
            })
            .collect();

        Shared { rows, single_elapsed_s }
    })
}

#[test]
fn c05_end_to_end_robustness() {
    criterion(5, "end-to-end-robustness", || {
        let s = shared();
        let successes = s.rows.iter().filter(|r| r.success).count();
        assert!(successes >= 95, "only {successes}/100 seeds within 2 deg / 0.03 m");
        assert!(
            s.single_elapsed_s < 120.0,
            "single-threaded sweep took {:.1} s, budget 120 s",
            s.single_elapsed_s
        );
        format!(
            "{successes}/100 seeds within 2 deg / 0.03 m, {:.1} s single-threaded",
            s.single_elapsed_s
        )
    });
}

#[test]
fn c06_hypothesis_budget() {
    criterion(6, "hypothesis-budget", || {
        let max = shared().rows.iter().map(|r| r.hypotheses).max().unwrap();
        assert!(max <= 2000, "a run scored {max} hypotheses, budget 2000");
        format!("max {max} of 2000 hypotheses across 100 runs")
    });
}

#[test]
fn c07_linear_work() {
    criterion(7, "linear-work", || {
        let start = Instant::now();
        let mut params = EstimatorParams::new(0.0125);
        params.inlier_threshold = 0.015;
        let mut medians = Vec::new();
        for &n in &[500usize, 1000, 2000] {
            let mut pgs_times = Vec::new();
            for rep in 0..11u64 {
                let inst = generate(&SynthConfig {
                    n,
                    outlier_ratio: 0.90,
                    noise_sigma: 0.005,
                    extent: 1.0,
                    seed: 7000 + rep,
                })
                .unwrap();
                // Rebuild the pivot graph independently to predict the counter.
                let g = build_first_order(&inst.correspondences, params.tau).unwrap();
                let o2 = to_o2graph(&build_sc2(&g)).unwrap();
                let expected = o2.positive_edge_count().min(params.k1) as u64 * (n as u64 - 2);
                let r = estimate(&inst.correspondences, &params).unwrap();
                assert_eq!(r.neighbor_checks, expected, "n = {n}, seed {}", 7000 + rep);
                pgs_times.push(r.stage_timings.pgs_s);
            }
            medians.push(median(pgs_times).unwrap());
        }
        for pair in medians.windows(2) {
            assert!(
                pair[1] <= 3.0 * pair[0],
                "PGS medians {medians:?}: doubling n more than tripled the stage"
            );
        }
        let secs = start.elapsed().as_secs_f64();
        assert!(secs < 60.0, "took {secs:.1} s, budget 60 s");
        format!(
            "checks = min(k1, edges) x (n-2) at n in {{500, 1000, 2000}}; PGS medians {:.2}/{:.2}/{:.2} ms, {secs:.1} s",
            medians[0] * 1e3,
            medians[1] * 1e3,
            medians[2] * 1e3
        )
    });
}

/// Runs the compiled binary's diag-stability command over 30 seeds and
/// returns (tau, median rotation gap in degrees, samples) per row.
fn stability_medians(noise: &str) -> Vec<(f64, f64, usize)> {
    let out = Command::new(env!("CARGO_BIN_EXE_turboreg"))
        .args([
            "diag-stability",
            "--taus",
            "0.01,0.1,0.5",
            "--seeds",
            "0..30",
            "--n",
            "60",
            "--noise",
            noise,
        ])
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "diag-stability exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 4, "unexpected row {line:?}");
        let samples: usize = cols[3].parse().unwrap();
        assert!(samples > 0, "tau {} found no cliques", cols[0]);
        rows.push((cols[0].parse().unwrap(), cols[1].parse().unwrap(), samples));
    }
    assert_eq!(rows.len(), 3, "expected one row per tau");
    rows
}

#[test]
fn c08_stability_trend() {
    criterion(8, "stability-trend", || {
        let noisy = stability_medians("0.005");
        for pair in noisy.windows(2) {
            assert!(
                pair[1].1 >= pair[0].1 - 1e-12,
                "noisy medians not nondecreasing: {noisy:?}"
            );
        }
        let clean = stability_medians("0");
        for &(tau, dr, _) in &clean {
            assert!(dr < 1e-6, "tau {tau}: clean median {dr} deg");
        }
        format!(
            "noisy medians {:.3}/{:.3}/{:.3} deg nondecreasing over 30 seeds; clean all < 1e-6 deg",
            noisy[0].1, noisy[1].1, noisy[2].1
        )
    });
}

#[test]
fn c09_baseline_direction() {
    criterion(9, "baseline-direction", || {
        let s = shared();
        let ours = s.rows.iter().filter(|r| r.success).count();
        let ransac = s.rows.iter().filter(|r| r.ransac_success).count();
        assert!(ours >= ransac, "recall {ours}/100 vs ransac {ransac}/100");
        format!("recall {ours}/100 vs ransac {ransac}/100 at 2000 hypotheses each")
    });
}

/// Feeds structurally broken correspondence files to the register command and
/// checks each exits with code 1 and a diagnostic, never a crash. Returns the
/// number of files checked.
fn fuzz_register_rejects_malformed() -> usize {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(0xf002);
    let mut cases: Vec<Vec<u8>> = vec![
        b"".to_vec(),
        b"\n\n\n".to_vec(),
        b"# only a comment\n".to_vec(),
        b"   \n\t\n".to_vec(),
        b"1 2 3 4 5 6\n".to_vec(),
        b"1 2 3 4 5 6\n7 8 9 1 2 3\n".to_vec(),
        b"1 2 3 4 5\n1 2 3 4 5\n1 2 3 4 5\n".to_vec(),
        b"1 2 3 4 5 6 7\n1 2 3 4 5 6 7\n1 2 3 4 5 6 7\n".to_vec(),
        b"1 2 3 4 5 six\n1 2 3 4 5 6\n1 2 3 4 5 6\n".to_vec(),
        b"nan 0 0 0 0 0\n0 1 0 0 1 0\n0 0 1 0 0 1\n".to_vec(),
        b"inf 0 0 0 0 0\n0 1 0 0 1 0\n0 0 1 0 0 1\n".to_vec(),
        b"1e999 0 0 0 0 0\n0 1 0 0 1 0\n0 0 1 0 0 1\n".to_vec(),
        b"0 0 0 0 0 0\n0 1 0 0 1 0\n0 0 1 0 0 --1\n".to_vec(),
        b"\x00\x01\x02\xff\xfe binary\n".to_vec(),
        vec![0xc3, 0x28, 0xa0, 0xa1, b'\n'],
        b"0 0 0 0 0 0\n0 1 0 0 1 0\n0 0 1 0 0 1\n0 0\n".to_vec(),
    ];
    // Break one numeric token of a well-formed file at a time.
    let good = "0.1 0.2 0.3 1.1 1.2 1.3\n0.4 0.5 0.6 1.4 1.5 1.6\n\
                0.7 0.8 0.9 1.7 1.8 1.9\n0.05 0.1 0.9 1.05 1.1 1.9\n";
    for _ in 0..24 {
        let mut tokens: Vec<String> = good.split_whitespace().map(str::to_string).collect();
        let victim = rng.gen_range(0..tokens.len());
        let len = rng.gen_range(1..=4);
        tokens[victim] = (0..len).map(|_| (b'a' + rng.gen_range(0..26)) as char).collect();
        let rows: Vec<String> = tokens.chunks(6).map(|c| c.join(" ")).collect();
        cases.push(rows.join("\n").into_bytes());
    }
    // Printable noise that never forms three data rows.
    for _ in 0..8 {
        let len = rng.gen_range(1..200);
        cases.push((0..len).map(|_| rng.gen_range(0x20u8..0x7f)).collect());
    }
    let total = cases.len() + 1;
    for (idx, bytes) in cases.into_iter().enumerate() {
        let path = dir.path().join(format!("case_{idx}.corr"));
        std::fs::write(&path, &bytes).unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_turboreg"))
            .args(["register", "--corr"])
            .arg(&path)
            .output()
            .expect("binary runs");
        assert_eq!(
            out.status.code(),
            Some(1),
            "case {idx} exited {:?}; stderr: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stderr.is_empty(), "case {idx}: no diagnostic on stderr");
    }
    // A directory instead of a file.
    let out = Command::new(env!("CARGO_BIN_EXE_turboreg"))
        .args(["register", "--corr"])
        .arg(dir.path())
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(1), "directory input exited {:?}", out.status.code());
    assert!(!out.stderr.is_empty(), "directory input: no diagnostic on stderr");
    total
}

#[test]
fn c10_determinism_robustness() {
    criterion(10, "determinism-robustness", || {
        // Weight and search artifacts from criteria 1 and 2 across pool sizes.
        let render = || -> String {
            graph_corpus()
                .iter()
                .map(|g| {
                    let w = build_sc2(g);
                    let o2 = to_o2graph(&w).unwrap();
                    let out = pgs_search(&o2, o2.positive_edge_count().max(1), g.n()).unwrap();
                    let weights: Vec<String> = (0..g.n())
                        .map(|i| {
                            w.row(i).iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
                        })
                        .collect();
                    let cliques: Vec<String> = out
                        .cliques
                        .iter()
                        .map(|c| format!("{:?}+{}", c.nodes, c.aggregated_weight))
                        .collect();
                    format!("{}|{}|{}", weights.join("/"), cliques.join("/"), out.raw_len)
                })
                .collect::<Vec<_>>()
                .join("\n")
        };
        let pool = |threads: usize| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
        };
        let one = pool(1).install(render);
        let eight = pool(8).install(render);
        assert_eq!(one, eight, "graph artifacts differ between 1 and 8 workers");

        // Criterion-5 result documents across pool sizes.
        let s = shared();
        for (seed, row) in s.rows.iter().enumerate() {
            assert_eq!(
                row.doc_single, row.doc_eight,
                "seed {seed}: documents differ between 1 and 8 workers"
            );
        }

        let checked = fuzz_register_rejects_malformed();
        format!(
            "graph artifacts and 100 documents byte-identical across 1/8 workers; {checked} malformed inputs all exited 1"
        )
    });
}
