use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vskimg_core::dataio::{default_channels, default_nodes, phantom_to_image, Phantom};
use vskimg_core::freq_domain::{build_mask, DomainShape, FrequencyDomain, Grid};
use vskimg_core::landweber::{iterate, theorem2_check, CheckStatus};
use vskimg_core::parametric::{
    bound_report, forward_channel, reconstruct_channel, synthetic_sequence, NoiseSpec, ParametricModel,
};
use vskimg_core::{ComplexScaling, Interpolant, KernelConfig, LandweberConfig, ScalingSamples};

fn setup() -> (Grid, FrequencyDomain) {
    let grid = Grid::for_outer_radius(128, 1000.0, 0.75).unwrap();
    let domain = build_mask(DomainShape::Disk { radius: 1000.0 }, grid.clone()).unwrap();
    (grid, domain)
}

#[test]
fn default_nodes_interpolate_random_data() {
    let nodes = default_nodes();
    assert_eq!(nodes.len(), 248);
    let kernel = KernelConfig::gaussian(0.02).unwrap();
    let scaling = ScalingSamples::constant(nodes.len(), 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..3 {
        let data: Vec<f64> = (0..nodes.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let interp = Interpolant::fit(&nodes, &scaling, &kernel, &data).unwrap();
        assert!(interp.residual() <= 1e-8, "residual {}", interp.residual());
    }
}

#[test]
fn default_nodes_lie_in_the_default_disk() {
    let (_, domain) = setup();
    let nodes = default_nodes();
    for i in 0..nodes.len() {
        assert!(domain.contains_point(nodes.point2(i)));
        let p = nodes.point2(i);
        let partner = (0..nodes.len()).any(|k| {
            let q = nodes.point2(k);
            (q[0] + p[0]).abs() < 1e-9 && (q[1] + p[1]).abs() < 1e-9
        });
        assert!(partner, "node {i} has no mirror node");
    }
}

#[test]
fn bound_report_holds_on_seeded_phantoms() {
    let (grid, domain) = setup();
    let nodes = default_nodes();
    let kernel = KernelConfig::gaussian(0.02).unwrap();
    let model = ParametricModel::default_surrogate();
    let ch = default_channels();
    let w1 = forward_channel(&model, [0.0, 0.0], ch[0].midpoint()).unwrap().value;
    let w2 = forward_channel(&model, [0.0, 0.0], ch[1].midpoint()).unwrap().value;
    for seed in [3, 4] {
        let phantom = Phantom::random_on(&grid, 2e5, seed).unwrap();
        let previous = phantom_to_image(&phantom.scaled(w1).unwrap(), &grid);
        let report = bound_report(
            &previous,
            &phantom.scaled(w2).unwrap(),
            &nodes,
            &kernel,
            &domain,
            1e-3,
            2.0 * grid.cell_size(),
        )
        .unwrap();
        assert!(report.holds(), "seed {seed}: {report:?}");
        assert!(report.residual <= 1e-8);
    }
}

#[test]
fn noisy_channel_reconstruction_is_nonnegative_and_meets_the_stop_bound() {
    let (grid, domain) = setup();
    let phantom = Phantom::default_on(&grid, 2e5).unwrap();
    let seq = synthetic_sequence(
        &phantom,
        &default_nodes(),
        &default_channels()[..2],
        &ParametricModel::default_surrogate(),
        &grid,
        NoiseSpec {
            relative_sigma: 0.03,
            seed: 11,
            enabled: true,
        },
    )
    .unwrap();
    let vis = &seq.visibilities[1];
    let rec = reconstruct_channel(
        vis,
        &ComplexScaling::plain(vis.len(), &domain),
        &KernelConfig::gaussian(0.02).unwrap(),
        &LandweberConfig::default(),
        &domain,
    )
    .unwrap();
    assert!(rec.run.image.min_real() >= 0.0);
    let check = theorem2_check(&rec.run.trace);
    assert_eq!(check.status, CheckStatus::Holds, "{check:?}");
    let again = iterate(&LandweberConfig::default(), &rec.init, &domain).unwrap();
    assert_eq!(again.image, rec.run.image);
}
