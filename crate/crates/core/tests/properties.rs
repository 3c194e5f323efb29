//! Property-based invariants of the kernel, the rescaling maps, the fits and
//! the CSV writer.

use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use choquard::asymptotics::{bracket_rate, fit_power_law};
use choquard::io::{fmt_f64, CsvTable};
use choquard::radial_grid::{make_grid, RadialField, RadialGrid};
use choquard::rescale::ScaleMap;
use choquard::riesz::{build_kernel, riesz_apply, RieszKernel};
use choquard::solver::{action_terms, ProblemParams, Regime};

struct Setup {
    grid: Arc<RadialGrid>,
    kernel: RieszKernel,
    params: ProblemParams,
}

fn setup() -> &'static Setup {
    static CELL: OnceLock<Setup> = OnceLock::new();
    CELL.get_or_init(|| {
        let grid = make_grid(3, 40.0, 240, 8.0).unwrap();
        let kernel = build_kernel(&grid, 2.0).unwrap();
        let params = ProblemParams::new(3, 2.0, Regime::LowerCritical, 2.8, 1.0, 1.0).unwrap();
        Setup { grid, kernel, params }
    })
}

/// Sum of Gaussian bumps `Σ aₖ exp(−(r/sₖ)²)`, positive and rapidly decaying.
fn bumps(grid: &Arc<RadialGrid>, spec: &[(f64, f64)]) -> RadialField {
    RadialField::from_fn(grid, |r| spec.iter().map(|(a, s)| a * (-(r / s) * (r / s)).exp()).sum())
}

fn bump_spec() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.1f64..3.0, 0.3f64..4.0), 1..4)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_is_linear(f in bump_spec(), g in bump_spec(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let s = setup();
        let (f, g) = (bumps(&s.grid, &f), bumps(&s.grid, &g));
        let combo = RadialField::new(
            s.grid.clone(),
            f.values.iter().zip(&g.values).map(|(x, y)| a * x + b * y).collect(),
        ).unwrap();
        let lhs = riesz_apply(&s.kernel, &combo).unwrap();
        let (kf, kg) = (riesz_apply(&s.kernel, &f).unwrap(), riesz_apply(&s.kernel, &g).unwrap());
        let scale = kf.values.iter().chain(&kg.values).fold(0.0f64, |m, v| m.max(v.abs())) * (a.abs() + b.abs());
        for k in 0..lhs.values.len() {
            let rhs = a * kf.values[k] + b * kg.values[k];
            prop_assert!((lhs.values[k] - rhs).abs() <= 1e-12 * scale.max(1e-300));
        }
    }

    #[test]
    fn kernel_is_symmetric(f in bump_spec(), g in bump_spec()) {
        let s = setup();
        let (f, g) = (bumps(&s.grid, &f), bumps(&s.grid, &g));
        let fg = riesz_apply(&s.kernel, &g).unwrap().inner(&f);
        let gf = riesz_apply(&s.kernel, &f).unwrap().inner(&g);
        prop_assert!(close(fg, gf, 1e-10), "<f, I g> = {fg}, <I f, g> = {gf}");
    }

    #[test]
    fn kernel_preserves_positivity(f in bump_spec()) {
        let s = setup();
        let pot = riesz_apply(&s.kernel, &bumps(&s.grid, &f)).unwrap();
        prop_assert!(pot.values.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn scale_maps_transfer_every_integral(spec in bump_spec(), la in -4.0f64..4.0, lb in -4.0f64..4.0) {
        let s = setup();
        let u = bumps(&s.grid, &spec);
        let map = ScaleMap { log_amplitude: la, log_length: lb };
        let w = map.apply(&u);
        let direct = action_terms(&s.params, &w, &map.kernel_for(&s.kernel)).unwrap();
        let before = action_terms(&s.params, &u, &s.kernel).unwrap();
        let moved = map.transfer(&before, 3, 2.0, s.params.p(), s.params.q);
        prop_assert!(close(direct.grad_sq, moved.grad_sq, 1e-10));
        prop_assert!(close(direct.l2_sq, moved.l2_sq, 1e-10));
        prop_assert!(close(direct.d_term, moved.d_term, 1e-10));
        prop_assert!(close(direct.lq_q, moved.lq_q, 1e-10));
    }

    #[test]
    fn scale_maps_compose_and_invert(spec in bump_spec(), la in -5.0f64..5.0, lb in -5.0f64..5.0, la2 in -5.0f64..5.0, lb2 in -5.0f64..5.0) {
        let s = setup();
        let u = bumps(&s.grid, &spec);
        let m1 = ScaleMap { log_amplitude: la, log_length: lb };
        let m2 = ScaleMap { log_amplitude: la2, log_length: lb2 };
        let two_steps = m2.apply(&m1.apply(&u));
        let one_step = m1.then(&m2).apply(&u);
        for k in 0..u.values.len() {
            prop_assert!(close(two_steps.values[k], one_step.values[k], 1e-12));
            prop_assert!(close(two_steps.grid.nodes[k], one_step.grid.nodes[k], 1e-12));
        }
        let back = m1.inverse().apply(&m1.apply(&u));
        for k in 0..u.values.len() {
            prop_assert!(close(back.values[k], u.values[k], 1e-12));
            prop_assert!(close(back.grid.nodes[k], u.grid.nodes[k], 1e-12));
        }
    }

    #[test]
    fn power_fits_recover_exact_laws(a in -3.0f64..3.0, lc in -5.0f64..5.0, lo in -2.0f64..4.0, decades in 1.0f64..8.0, n in 4usize..16) {
        let c = lc.exp();
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| 10f64.powf(lo + decades * k as f64 / (n - 1) as f64))
            .map(|e| (e, c * e.powf(a)))
            .collect();
        let fit = fit_power_law(&pairs).unwrap();
        prop_assert!((fit.exponent - a).abs() < 1e-9);
        prop_assert!(close(fit.prefactor, c, 1e-8));
        prop_assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn exact_log_corrected_laws_are_bracketed(a in -2.0f64..2.0, b in -2.0f64..2.0, lo in 0.5f64..3.0, decades in 1.0f64..8.0, n in 3usize..12) {
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| 10f64.powf(lo + decades * k as f64 / (n - 1) as f64))
            .map(|e| (e, 2.5 * e.powf(a) * e.ln().powf(b)))
            .collect();
        let br = bracket_rate(&pairs, a, b).unwrap();
        prop_assert!(br.worst_excess <= 1e-9, "excess {}", br.worst_excess);
    }

    #[test]
    fn floats_round_trip_with_17_significant_digits(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        let s = fmt_f64(x);
        prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        let mantissa = s.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
        prop_assert_eq!(mantissa.len(), 17);
    }

    #[test]
    fn csv_tables_parse_back_cell_for_cell(
        header in prop::collection::vec("[a-z_]{1,8}", 1..5),
        cells in prop::collection::vec(prop::collection::vec("[ -~\n]{0,12}", 5), 0..6),
    ) {
        let mut t = CsvTable::new(header.clone());
        let rows: Vec<Vec<String>> = cells.iter().map(|r| r[..header.len()].to_vec()).collect();
        for r in &rows {
            t.push(r.clone());
        }
        let text = t.render();
        prop_assert!(!text.contains('\r'));
        prop_assert!(text.ends_with('\n'));
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let parsed_header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
        prop_assert_eq!(parsed_header, header);
        let parsed: Vec<Vec<String>> = reader.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
        prop_assert_eq!(parsed, rows);
    }
}
