use fdcf_core::channel::draw_channels;
use fdcf_core::config::GeometryConfig;
use fdcf_core::montecarlo::ergodic_se_mc;
use fdcf_core::scenario::{correlated_shadowing, place_network, wrapped_distance, Layout};
use fdcf_core::{baseline_alloc, Baseline, QuantizerParams, Scenario, ServiceMap, SystemConfig};
use nalgebra::DMatrix;
use num_complex::Complex64;

fn small_scenario(cfg: &SystemConfig) -> Scenario {
    let beta_dl = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.25, 2.0]);
    let beta_ul = DMatrix::from_row_slice(2, 2, &[0.8, 0.3, 1.5, 0.6]);
    let beta_udi = DMatrix::from_element(2, 2, 0.1);
    let beta_ri = DMatrix::from_element(2, 2, 0.01);
    Scenario::from_large_scale(beta_dl, beta_ul, beta_udi, beta_ri, cfg).unwrap()
}

fn small_cfg() -> SystemConfig {
    let mut cfg = SystemConfig::default();
    cfg.geometry.aps = 2;
    cfg.geometry.dl_ues = 2;
    cfg.geometry.ul_ues = 2;
    // Pilot SNR of order one keeps γ well inside (0, β).
    cfg.radio.p_pilot_w = cfg.noise_w() / 5.0;
    cfg
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[test]
fn estimate_and_error_moments() {
    let cfg = small_cfg();
    let scn = small_scenario(&cfg);
    let n = 100_000;
    let (m, k) = (1, 0);
    let (g, b) = (scn.gamma_dl[(m, k)], scn.beta_dl[(m, k)]);
    assert!(g > 0.0 && g < b);
    let (mut s_hat, mut s_err, mut s4, mut cross) = (0.0, 0.0, 0.0, Complex64::new(0.0, 0.0));
    let nt = cfg.radio.n_tx as f64;
    for t in 0..n {
        let ch = draw_channels(
            &scn,
            cfg.radio.n_tx,
            cfg.radio.n_rx,
            cfg.gamma_ri(),
            t as u64,
        )
        .unwrap();
        let h = ch.g_dl_hat(m, k);
        let e = ch.e_dl(m, k);
        let p = dot(h, h).re;
        s_hat += p;
        s4 += p * p;
        s_err += dot(e, e).re;
        cross += h[0].conj() * e[0];
    }
    let nf = n as f64;
    assert!((s_hat / nf / (nt * g) - 1.0).abs() < 0.02);
    assert!((s_err / nf / (nt * (b - g)) - 1.0).abs() < 0.02);
    assert!((s4 / nf / (nt * (nt + 1.0) * g * g) - 1.0).abs() < 0.03);
    let corr = cross.norm() / nf / (g * (b - g)).sqrt();
    assert!(corr < 0.02, "estimate/error correlation {corr}");
}

#[test]
fn uplink_cross_moment() {
    let cfg = small_cfg();
    let scn = small_scenario(&cfg);
    let n = 100_000;
    let (m, l, q) = (0, 0, 1);
    let mut acc = 0.0;
    for t in 0..n {
        let ch = draw_channels(
            &scn,
            cfg.radio.n_tx,
            cfg.radio.n_rx,
            cfg.gamma_ri(),
            1_000_000 + t as u64,
        )
        .unwrap();
        acc += dot(ch.g_ul_hat(m, l), ch.g_ul(m, q)).norm_sqr();
    }
    let want = cfg.radio.n_rx as f64 * scn.gamma_ul[(m, l)] * scn.beta_ul[(m, q)];
    assert!((acc / n as f64 / want - 1.0).abs() < 0.02);
}

#[test]
fn placement_is_uniform_on_average() {
    let geom = GeometryConfig {
        side_km: 1.0,
        aps: 32,
        dl_ues: 10,
        ul_ues: 10,
    };
    let drops = 10_000;
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
    for s in 0..drops {
        let l = place_network(&geom, 7 + s as u64);
        for p in l.aps.iter().chain(&l.dl_ues).chain(&l.ul_ues) {
            assert!((0.0..1.0).contains(&p[0]) && (0.0..1.0).contains(&p[1]));
            sx += p[0];
            sy += p[1];
            n += 1.0;
        }
    }
    assert!((sx / n - 0.5).abs() < 0.01 && (sy / n - 0.5).abs() < 0.01);
}

#[test]
fn shadowing_variance_and_correlation() {
    let cfg = SystemConfig::default();
    let p = &cfg.pathloss;
    let layout = Layout {
        side_km: 1.0,
        aps: vec![[0.1, 0.1], [0.15, 0.1], [0.7, 0.6]],
        dl_ues: vec![[0.4, 0.4]],
        ul_ues: vec![[0.42, 0.4]],
    };
    let n = 40_000;
    let mut z = Vec::with_capacity(n);
    for s in 0..n {
        let sh = correlated_shadowing(&layout, p, s as u64);
        z.push([
            sh.z_dl[(0, 0)],
            sh.z_dl[(1, 0)],
            sh.z_dl[(2, 0)],
            sh.z_ul[(0, 0)],
        ]);
    }
    let nf = n as f64;
    let mean = |i: usize| z.iter().map(|v| v[i]).sum::<f64>() / nf;
    let cov = |i: usize, j: usize| {
        let (mi, mj) = (mean(i), mean(j));
        z.iter().map(|v| (v[i] - mi) * (v[j] - mj)).sum::<f64>() / nf
    };
    for i in 0..4 {
        assert!((cov(i, i) - 1.0).abs() < 0.03, "var {}", cov(i, i));
    }
    let kernel =
        |a: [f64; 2], b: [f64; 2]| 2f64.powf(-1000.0 * wrapped_distance(a, b, 1.0) / p.decorr_m);
    let d = p.shadow_delta;
    // Same UE, two APs: shared UE component plus correlated AP components.
    let want01 = d * kernel(layout.aps[0], layout.aps[1]) + (1.0 - d);
    assert!(
        (cov(0, 1) - want01).abs() < 0.03,
        "{} vs {want01}",
        cov(0, 1)
    );
    let want02 = d * kernel(layout.aps[0], layout.aps[2]) + (1.0 - d);
    assert!((cov(0, 2) - want02).abs() < 0.03);
    // Same AP, nearby DL and UL UEs.
    let want03 = d + (1.0 - d) * kernel(layout.dl_ues[0], layout.ul_ues[0]);
    assert!(
        (cov(0, 3) - want03).abs() < 0.03,
        "{} vs {want03}",
        cov(0, 3)
    );
}

#[test]
fn ergodic_stderr_follows_clt() {
    let cfg = small_cfg();
    let scn = small_scenario(&cfg);
    let map = ServiceMap::full(2, 2, 2);
    let q = QuantizerParams::new(2).unwrap();
    let alloc = baseline_alloc(Baseline::Epa1, &scn, &map, &q, cfg.radio.n_tx, 0);
    let a = ergodic_se_mc(&scn, &map, &q, &alloc, &cfg, 20_000, 5).unwrap();
    let b = ergodic_se_mc(&scn, &map, &q, &alloc, &cfg, 40_000, 6).unwrap();
    for (x, y) in a.dl.iter().chain(&a.ul).zip(b.dl.iter().chain(&b.ul)) {
        let ratio = (y.stderr / x.stderr).powi(2);
        assert!((ratio - 0.5).abs() < 0.1, "stderr² ratio {ratio}");
    }
}
