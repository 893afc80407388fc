use fgn_core::generate::{sample_nodes, sigma_for, FgnGenerator, FgnParams, GenOptions, SbmGenerator, SbmParams};
use fgn_core::motifs::degree_histogram;
use fgn_core::seed::replicate_seed;

const MASTER: u64 = 77;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn node_count_is_poisson_with_mean_n_mass() {
    // γ = 0: N ~ Poi(n) exactly
    let gen = FgnGenerator::new(FgnParams::new(300.0, 1.0, 0.0, 2), GenOptions::default()).unwrap();
    let counts: Vec<f64> = (0..2000)
        .map(|r| gen.generate(replicate_seed(MASTER, 300, r)).unwrap().graph.num_nodes() as f64)
        .collect();
    let m = mean(&counts);
    let var = counts.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
    // standard error of the mean is sqrt(300 / 2000) ≈ 0.39
    assert!((m - 300.0).abs() < 1.6, "mean {m}");
    assert!((var / 300.0 - 1.0).abs() < 0.1, "variance {var}");

    // γ > 0: conditional on the measure, N ~ Poi(n M)
    let gen = FgnGenerator::new(FgnParams::with_nu(200.0, 1.0, 0.3, 2).unwrap(), GenOptions::default()).unwrap();
    let (_, measure) = gen.measure(5).unwrap();
    let lambda = 200.0 * measure.total_mass;
    let counts: Vec<f64> = (0..2000)
        .map(|s| sample_nodes(&measure, 200.0, replicate_seed(MASTER, 1, s)).len() as f64)
        .collect();
    let m = mean(&counts);
    assert!((m - lambda).abs() < 4.0 * (lambda / 2000.0).sqrt(), "mean {m} vs {lambda}");
}

#[test]
fn generated_graphs_are_simple() {
    for (r, nu) in [0.0, 0.2, 0.6, 1.2].into_iter().enumerate() {
        let gen = FgnGenerator::new(FgnParams::with_nu(800.0, 2.0, nu, 2).unwrap(), GenOptions::default()).unwrap();
        let g = gen.generate(replicate_seed(MASTER, 800, r as u64)).unwrap().graph;
        assert!(g.check_simple());
        assert_eq!(g.degrees().iter().sum::<usize>(), 2 * g.num_edges());
    }
}

#[test]
fn edge_count_non_decreasing_in_density() {
    let seeds: Vec<u64> = (0..60).map(|r| replicate_seed(MASTER, 600, r)).collect();
    let means: Vec<f64> = [0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|&rho| {
            let gen = FgnGenerator::new(FgnParams::with_nu(600.0, rho, 0.3, 2).unwrap(), GenOptions::default()).unwrap();
            let e: Vec<f64> = seeds.iter().map(|&s| gen.generate(s).unwrap().graph.num_edges() as f64).collect();
            mean(&e)
        })
        .collect();
    assert!(means.windows(2).all(|w| w[0] <= w[1]), "{means:?}");
}

#[test]
fn identical_seeds_give_identical_graphs() {
    let p = FgnParams::with_nu(1500.0, 1.0, 0.4, 2).unwrap();
    let a = FgnGenerator::new(p.clone(), GenOptions::default()).unwrap().generate(9).unwrap();
    let b = FgnGenerator::new(p, GenOptions::default()).unwrap().generate(9).unwrap();
    assert_eq!(a.graph.edges(), b.graph.edges());
    assert_eq!(a.total_mass, b.total_mass);
}

fn sbm(n: f64, gamma: f64, sigma_in: f64, sigma_out: f64) -> SbmGenerator {
    let p = SbmParams {
        gamma1: gamma,
        gamma2: gamma,
        sigma_in,
        sigma_out,
        n,
        dim: 2,
        edge_model: Default::default(),
        seed: 0,
    };
    SbmGenerator::new(p, GenOptions::default()).unwrap()
}

#[test]
fn sbm_vanishing_inter_radius_has_no_cross_edges() {
    let gen = sbm(400.0, 0.4, 0.05, 1e-9);
    for r in 0..5 {
        let g = gen.generate(replicate_seed(MASTER, 400, r)).unwrap().graph;
        let labels = g.labels.as_ref().unwrap();
        assert!(g.edges().iter().all(|&(u, v)| labels[u as usize] == labels[v as usize]));
        assert!(g.num_edges() > 0);
    }
}

#[test]
fn sbm_homogeneous_has_doubled_intensity() {
    // two Lebesgue communities of size n with one radius: a single FGN of size 2n
    let n = 500.0;
    let rho = 2.0;
    let sigma = sigma_for(2.0 * n, rho, 2);
    let gen = sbm(n, 0.0, sigma, sigma);
    let single = FgnGenerator::new(FgnParams::new(2.0 * n, rho, 0.0, 2), GenOptions::default()).unwrap();
    let mut hist_sbm = vec![0usize; 40];
    let mut hist_single = vec![0usize; 40];
    let mut degree_sbm = Vec::new();
    for r in 0..200 {
        let g = gen.generate(replicate_seed(MASTER, 1, r)).unwrap().graph;
        degree_sbm.push(2.0 * g.num_edges() as f64 / g.num_nodes() as f64);
        for (d, c) in degree_histogram(&g) {
            hist_sbm[d.min(39)] += c;
        }
        let h = single.generate(replicate_seed(MASTER, 2, r)).unwrap().graph;
        for (d, c) in degree_histogram(&h) {
            hist_single[d.min(39)] += c;
        }
    }
    let m = mean(&degree_sbm);
    // boundary loss keeps the finite-box mean slightly below ρ
    assert!((m / rho - 1.0).abs() < 0.05, "mean degree {m}");
    let (ta, tb) = (hist_sbm.iter().sum::<usize>() as f64, hist_single.iter().sum::<usize>() as f64);
    let tv: f64 = hist_sbm.iter().zip(&hist_single).map(|(&a, &b)| (a as f64 / ta - b as f64 / tb).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.02, "total variation {tv}");
}
