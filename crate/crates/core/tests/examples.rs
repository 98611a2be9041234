use approx::assert_relative_eq;
use biphoton::detection::{
    coincidence_scan, crosstalk_from_log, fedorov_ratio, fedorov_ratio_intensity, fwhm_of, singles_scan,
    wavelength_average, DetectionGeometry, WidthMethod,
};
use biphoton::field::overlap;
use biphoton::hologram::{
    encode_hologram, encode_phase, export_pgm, import_pgm, lowpass_envelope, profile_fwhm, pump_field,
    simulate_first_order, simulate_order, symmetric_axis, HologramImage, HologramLayout, PumpProfileParams,
};
use biphoton::kernel::{
    build_double_gaussian, build_from_pump, build_multipeak, double_gaussian_grids, multipeak_grids,
    peak_log_marginals, phase_matching_factor, Branch, MultiPeakParams, PhaseMatchModel, PumpSpectrum, Side,
    TpaKernel,
};
use biphoton::optics::{fwhm_per_sigma, fwhm_to_sigma_k, PhaseMatching, Regime, GAMMA1, GAMMA2};
use biphoton::schmidt::{analytic_double_gaussian, schmidt_decompose, Truncation};
use biphoton::{IndexModel, PumpWidths, Sellmeier, WavevectorGrid};
use nalgebra::DMatrix;

const SIGMA: f64 = 0.00942;
const K0: f64 = 0.168;
const OFFSET: f64 = 2.694;

fn widths(a: f64, b: f64) -> PumpWidths {
    PumpWidths::new(a, b).unwrap()
}

fn three_peaks(alpha: Option<f64>) -> MultiPeakParams {
    MultiPeakParams {
        modes: 3,
        k0: K0,
        transverse_k: OFFSET,
        widths: widths(SIGMA, SIGMA),
        alpha,
    }
}

fn three_peak_kernel(alpha: Option<f64>) -> TpaKernel {
    let p = three_peaks(alpha);
    let (gs, gi) = multipeak_grids(&p, Branch::Positive, 512, 5.0).unwrap();
    build_multipeak(&p, Branch::Positive, &gs, &gi).unwrap()
}

fn peak_positions(kernel: &TpaKernel) -> Vec<f64> {
    let gs = kernel.grid_s().points();
    let s = singles_scan(kernel, &DetectionGeometry::default().narrow(), &gs).unwrap();
    s.peaks(1e-3).into_iter().map(|j| s.positions[j]).collect()
}

#[test]
fn pump_transform_matches_multipeak_construction() {
    let p = three_peaks(None);
    let (gs, gi) = multipeak_grids(&p, Branch::Positive, 400, 5.0).unwrap();
    let direct = build_multipeak(&p, Branch::Positive, &gs, &gi).unwrap();

    let field_params = PumpProfileParams {
        modes: 3,
        k0: K0,
        sigma_k: SIGMA,
        alpha: None,
    };
    let xs = symmetric_axis(9.0 / SIGMA, 4001);
    let field = pump_field(&field_params, &xs).unwrap();
    // every ks + ki lands on a sample of the sum grid
    let pump = PumpSpectrum::from_field(&field, WavevectorGrid::sum_grid(&gs, &gi).unwrap()).unwrap();
    let pm = PhaseMatching {
        regime: Regime::Noncollinear,
        transverse_k: OFFSET,
        sigma_prime: SIGMA,
        gamma1: GAMMA1,
        gamma2: GAMMA2,
    };
    let via_pump = build_from_pump(&pump, &pm, &gs, &gi, PhaseMatchModel::Gaussian, Branch::Positive).unwrap();
    let peak = direct.amplitude().amax();
    let diff = (direct.amplitude() - via_pump.amplitude()).amax();
    assert!(diff < 1e-6 * peak, "{diff:e}");
}

#[test]
fn sinc_and_gaussian_phase_matching_widths_agree() {
    let pm = PhaseMatching {
        regime: Regime::Noncollinear,
        transverse_k: OFFSET,
        sigma_prime: 0.00317,
        gamma1: GAMMA1,
        gamma2: GAMMA2,
    };
    let qs = symmetric_axis(0.05, 20001).into_iter().map(|d| OFFSET + d).collect::<Vec<_>>();
    let fwhm = |model| {
        let ys: Vec<f64> = qs
            .iter()
            .map(|&q| phase_matching_factor(q, &pm, model, Branch::Positive).powi(2))
            .collect();
        profile_fwhm(&qs, &ys).unwrap()
    };
    let (s, g) = (fwhm(PhaseMatchModel::Sinc), fwhm(PhaseMatchModel::Gaussian));
    assert!((s / g - 1.0).abs() < 0.10, "sinc {s} gaussian {g}");
}

#[test]
fn three_peak_marginal_spacing() {
    let k = three_peak_kernel(None);
    let pos = peak_positions(&k);
    assert_eq!(pos.len(), 3);
    let step = k.grid_s().step();
    for w in pos.windows(2) {
        assert!((w[1] - w[0] - K0).abs() <= step);
    }
}

#[test]
fn weighted_three_peaks_have_brighter_centre() {
    let k = three_peak_kernel(Some(0.63));
    let s = singles_scan(&k, &DetectionGeometry::default(), &k.grid_s().points()).unwrap();
    let p = s.peaks(1e-3);
    assert_eq!(p.len(), 3);
    assert!(s.rates[p[1]] > s.rates[p[0]] && s.rates[p[1]] > s.rates[p[2]]);
}

#[test]
fn isolated_equal_width_peaks_factorize() {
    let k = three_peak_kernel(None);
    let (gs, gi) = (k.grid_s(), k.grid_i());
    let p = three_peaks(None);
    let half = 4.0 * SIGMA;
    for (cs, ci) in p.peak_positions(Side::Signal, 1.0).into_iter().zip(p.peak_positions(Side::Idler, 1.0)) {
        let rows: Vec<usize> = (0..gs.n_points).filter(|&r| (gs.point(r) - cs).abs() <= half).collect();
        let cols: Vec<usize> = (0..gi.n_points).filter(|&c| (gi.point(c) - ci).abs() <= half).collect();
        let block = DMatrix::from_fn(rows.len(), cols.len(), |r, c| k.amplitude()[(rows[r], cols[c])]);
        let sv = block.singular_values();
        let total: f64 = sv.iter().map(|s| s * s).sum();
        let residual = (1.0 - sv[0] * sv[0] / total).max(0.0).sqrt();
        assert!(residual < 1e-6, "{residual:e}");
    }
}

#[test]
fn ratio_two_spectrum_at_fine_resolution() {
    let w = widths(0.01, 0.02);
    let (gs, gi) = double_gaussian_grids(&w, 1024, 5.0).unwrap();
    let k = build_double_gaussian(&w, &gs, &gi).unwrap();
    let d = schmidt_decompose(&k, Truncation::Count(10)).unwrap();
    let a = analytic_double_gaussian(&w, 10).unwrap();
    assert_relative_eq!(a.ratio, 1.0 / 9.0, max_relative = 1e-12);
    for (got, want) in d.weights().iter().zip(&a.eigenvalues) {
        assert!((got - want).abs() < 1e-6, "{got} {want}");
    }
    for (m, want) in [0.8889, 0.0988, 0.0110].iter().enumerate() {
        assert!((d.weights()[m] - want).abs() < 5e-5);
    }
    assert!((d.metrics().unwrap().schmidt_number - 1.25).abs() < 1e-3);
}

#[test]
fn separated_peaks_give_localized_modes() {
    let k = three_peak_kernel(None);
    let d = schmidt_decompose(&k, Truncation::Count(3)).unwrap();
    let gs = k.grid_s();
    let centres = three_peaks(None).peak_positions(Side::Signal, 1.0);
    for mode in &d.signal_modes {
        let best = centres
            .iter()
            .map(|c| {
                (0..gs.n_points)
                    .filter(|&j| (gs.point(j) - c).abs() <= 4.0 * SIGMA)
                    .map(|j| mode[j] * mode[j])
                    .sum::<f64>()
                    * gs.step()
            })
            .fold(0.0, f64::max);
        assert!(best >= 1.0 - 1e-9, "{best}");
    }
}

#[test]
fn global_scale_leaves_decomposition_unchanged() {
    let w = widths(0.01, 0.025);
    let (gs, gi) = double_gaussian_grids(&w, 200, 5.0).unwrap();
    let k = build_double_gaussian(&w, &gs, &gi).unwrap();
    let scaled = TpaKernel::from_matrix(gs, gi, k.amplitude() * 37.5).unwrap();
    let a = schmidt_decompose(&k, Truncation::default()).unwrap();
    let b = schmidt_decompose(&scaled, Truncation::default()).unwrap();
    assert_eq!(a.coefficients.len(), b.coefficients.len());
    for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
        assert!((x - y).abs() < 1e-12);
    }
    for (f, g) in a.signal_modes.iter().zip(&b.signal_modes) {
        assert!(f.iter().zip(g).all(|(x, y)| (x - y).abs() < 1e-9));
    }
}

#[test]
fn single_mode_singles_and_conditional_widths_match() {
    let w = widths(SIGMA, SIGMA);
    let (gs, gi) = double_gaussian_grids(&w, 512, 5.0).unwrap();
    let k = build_double_gaussian(&w, &gs, &gi).unwrap();
    let r = fedorov_ratio(&k, &DetectionGeometry::default()).unwrap();
    assert!((r.ratio - 1.0).abs() < 0.05, "{}", r.ratio);
}

#[test]
fn single_mode_marginal_width_has_closed_form() {
    let w = widths(SIGMA, SIGMA);
    let (gs, gi) = double_gaussian_grids(&w, 512, 5.0).unwrap();
    let k = build_double_gaussian(&w, &gs, &gi).unwrap();
    let s = singles_scan(&k, &DetectionGeometry::default().narrow(), &gs.points()).unwrap();
    // |F|^2 marginal has variance (σ^2 + σ'^2)/8
    let want = fwhm_per_sigma() * (2.0 * SIGMA * SIGMA / 8.0).sqrt();
    let interpolated = fwhm_of(&s, WidthMethod::HalfMaximum).unwrap();
    assert!((interpolated / want - 1.0).abs() < 1e-3, "{interpolated} {want}");
    let fitted = fwhm_of(&s, WidthMethod::GaussianFit).unwrap();
    assert!((fitted / want - 1.0).abs() < 1e-6, "{fitted} {want}");
}

#[test]
fn fedorov_ratio_tracks_schmidt_number_and_ignores_scale() {
    let w = widths(0.01, 0.02);
    let (gs, gi) = double_gaussian_grids(&w, 400, 5.0).unwrap();
    let k = build_double_gaussian(&w, &gs, &gi).unwrap();
    let geom = DetectionGeometry::default().narrow();
    let r = fedorov_ratio(&k, &geom).unwrap().ratio;
    assert!((r / 1.25 - 1.0).abs() < 0.10, "{r}");
    let mut i = k.intensity();
    i.values *= 123.0;
    assert_relative_eq!(fedorov_ratio_intensity(&i, &geom).unwrap().ratio, r, max_relative = 1e-12);
}

#[test]
fn idler_slit_on_a_peak_selects_one_signal_peak() {
    let k = three_peak_kernel(None);
    let geom = DetectionGeometry::default().narrow();
    let p = three_peaks(None);
    let signal = p.peak_positions(Side::Signal, 1.0);
    let gs = k.grid_s();
    let nearest = |x: f64| gs.point(gs.fractional_index(x).round() as usize);
    for (m, ci) in p.peak_positions(Side::Idler, 1.0).into_iter().enumerate() {
        let targets: Vec<f64> = signal.iter().map(|&c| nearest(c)).collect();
        let c = coincidence_scan(&k, &geom, ci, &targets).unwrap();
        let main = c.rates[m];
        for (n, r) in c.rates.iter().enumerate() {
            if n != m {
                assert!(*r <= 1e-30 * main, "{m} {n} {r:e} {main:e}");
            }
        }
    }
    // the same suppression, read off the log-domain peak profiles
    let logs = peak_log_marginals(&p, 1.0, Side::Signal, gs).unwrap();
    let x = crosstalk_from_log(&logs, gs).unwrap();
    assert!(x.log10(0, 1) < -30.0);
}

#[test]
fn idler_slit_between_peaks_gives_two_equal_peaks() {
    let p = three_peaks(None);
    let signal = p.peak_positions(Side::Signal, 1.0);
    let idler = p.peak_positions(Side::Idler, 1.0);
    // grids symmetric about both midpoints, so the tie is exact up to rounding
    let half = 1.5 * K0 + 6.0 * SIGMA;
    let gs = WavevectorGrid::centered(0.5 * (signal[0] + signal[1]), half, 721).unwrap();
    let mid = 0.5 * (idler[0] + idler[1]);
    let gi = WavevectorGrid::centered(mid, half, 721).unwrap();
    let k = build_multipeak(&p, Branch::Positive, &gs, &gi).unwrap();
    let c = coincidence_scan(&k, &DetectionGeometry::default().narrow(), mid, &gs.points()).unwrap();
    let peaks: Vec<usize> = c.peaks(1e-6);
    assert_eq!(peaks.len(), 2);
    assert_relative_eq!(c.rates[peaks[0]], c.rates[peaks[1]], max_relative = 1e-9);
    assert_eq!(peaks[0] + peaks[1], gs.n_points - 1);
}

#[test]
fn crosstalk_exponent_scales_with_squared_separation() {
    let p = three_peaks(None);
    let (gs, _) = multipeak_grids(&p, Branch::Positive, 512, 5.0).unwrap();
    let logs = peak_log_marginals(&p, 1.0, Side::Signal, &gs).unwrap();
    let x = crosstalk_from_log(&logs, &gs).unwrap();
    let (adjacent, next) = (x.log_values[(0, 1)], x.log_values[(0, 2)]);
    assert_relative_eq!(next / adjacent, 4.0, max_relative = 1e-9);
    // closed form: X = exp(-d^2 / 2v), v = (σ^2 + σ'^2)/8
    assert_relative_eq!(adjacent, -K0 * K0 / (2.0 * (2.0 * SIGMA * SIGMA / 8.0)), max_relative = 1e-9);
    assert!(x.log10(0, 1) < -41.0);
    assert_eq!(x.linear[(1, 1)], 1.0);
}

fn bbo() -> IndexModel {
    IndexModel::Sellmeier {
        coeffs: Sellmeier::bbo(),
        cut_angle: 33.3047f64.to_radians(),
    }
}

fn single_peak_builder(
    w: PumpWidths,
) -> impl Fn(f64, &WavevectorGrid, &WavevectorGrid) -> biphoton::Result<TpaKernel> + Sync {
    move |k, gs, gi| {
        let p = MultiPeakParams {
            modes: 1,
            k0: 0.0,
            transverse_k: k,
            widths: w,
            alpha: None,
        };
        build_multipeak(&p, Branch::Positive, gs, gi)
    }
}

#[test]
fn zero_width_filter_is_the_degenerate_intensity() {
    let w = widths(SIGMA, SIGMA);
    let build = single_peak_builder(w);
    let gs = WavevectorGrid::centered(1.347, 0.06, 256).unwrap();
    let gi = WavevectorGrid::centered(-1.347, 0.06, 256).unwrap();
    let geom = DetectionGeometry {
        filter_fwhm_nm: 0.0,
        ..Default::default()
    };
    let k_deg = biphoton::optics::transverse_k_at(&bbo(), 0.405, 0.81).unwrap();
    let avg = wavelength_average(&bbo(), 405.0, &geom, 21, &gs, &gi, &build).unwrap();
    assert_eq!(avg.samples, vec![(810.0, 1.0)]);
    let deg = build(k_deg, &gs, &gi).unwrap().intensity();
    let diff = (&avg.intensity.values - &deg.values).amax();
    assert!(diff <= 1e-14 * deg.values.amax());
}

#[test]
fn filter_average_keeps_the_peak_in_place() {
    let w = widths(SIGMA, SIGMA);
    let build = single_peak_builder(w);
    let k_deg = biphoton::optics::transverse_k_at(&bbo(), 0.405, 0.81).unwrap();
    let half = 5.0 * SIGMA + 0.03;
    let gs = WavevectorGrid::centered(k_deg / 2.0, half, 512).unwrap();
    let gi = WavevectorGrid::centered(-k_deg / 2.0, half, 512).unwrap();
    let geom = DetectionGeometry::default().narrow();
    let avg = wavelength_average(&bbo(), 405.0, &geom, 21, &gs, &gi, &build).unwrap();
    let total: f64 = avg.samples.iter().map(|s| s.1).sum();
    assert_relative_eq!(total, 1.0, max_relative = 1e-14);
    let argmax = |m: &[f64]| (0..m.len()).max_by(|&a, &b| m[a].total_cmp(&m[b])).unwrap();
    let a = argmax(&avg.intensity.marginal(Side::Signal));
    let d = argmax(&build(k_deg, &gs, &gi).unwrap().marginal_intensity(Side::Signal));
    assert!(a.abs_diff(d) <= 1, "{a} {d}");
}

fn three_peak_pump() -> PumpProfileParams {
    PumpProfileParams {
        modes: 3,
        k0: K0,
        sigma_k: fwhm_to_sigma_k(246.0).unwrap(),
        alpha: Some(0.63),
    }
}

#[test]
fn weighted_pump_spectrum_and_envelope() {
    let params = three_peak_pump();
    let xs = symmetric_axis(9.0 / params.sigma_k, 4001);
    let field = pump_field(&params, &xs).unwrap();
    let grid = WavevectorGrid::centered(0.0, 0.5, 2001).unwrap();
    let v = PumpSpectrum::from_field(&field, grid).unwrap();
    let pts = grid.points();
    let at = |k: f64| {
        let j = (0..pts.len()).min_by(|&a, &b| (pts[a] - k).abs().total_cmp(&(pts[b] - k).abs())).unwrap();
        v.amplitude[j].norm_sqr()
    };
    let ratio = at(0.0) / at(2.0 * K0);
    assert_relative_eq!(ratio, (0.5f64 / 0.315).powi(2), max_relative = 1e-3);
    assert!((ratio - 2.52).abs() < 0.01);
    assert_relative_eq!(at(2.0 * K0), at(-2.0 * K0), max_relative = 1e-9);

    let env = lowpass_envelope(&field, K0);
    let fwhm = profile_fwhm(&xs, &env).unwrap();
    assert!((fwhm / 246.0 - 1.0).abs() < 0.01, "{fwhm}");
}

#[test]
fn encoded_three_peak_target_recovers_three_bright_centred_lobes() {
    let layout = HologramLayout::default();
    let xs = layout.crystal_coordinates();
    let params = three_peak_pump();
    let target = pump_field(&params, &xs).unwrap();
    let holo = encode_hologram(&target, &layout).unwrap();
    let out = simulate_first_order(&holo, &layout.input_beam(None).unwrap(), &layout).unwrap();
    let spectrum = PumpSpectrum::from_field(&out, WavevectorGrid::centered(0.0, 0.5, 2001).unwrap()).unwrap();
    let power: Vec<f64> = spectrum.amplitude.iter().map(|z| z.norm_sqr()).collect();
    let peaks: Vec<usize> = (1..power.len() - 1)
        .filter(|&j| power[j] > power[j - 1] && power[j] >= power[j + 1] && power[j] > 1e-3 * power[1000])
        .collect();
    assert_eq!(peaks.len(), 3);
    assert!(power[peaks[1]] > power[peaks[0]] && power[peaks[1]] > power[peaks[2]]);
    let env = profile_fwhm(&xs, &lowpass_envelope(&out, K0)).unwrap();
    assert!((env / 246.0 - 1.0).abs() < 0.02);
}

/// Ratio of the central near-field lobe to the first side lobe.
fn lobe_ratio(field: &biphoton::FieldProfile1D) -> f64 {
    let i = field.intensities();
    let c = i.len() / 2;
    let centre = i[c - 2..c + 3].iter().cloned().fold(0.0, f64::max);
    let lobes: Vec<usize> = (c + 3..i.len() - 1).filter(|&j| i[j] > i[j - 1] && i[j] >= i[j + 1]).collect();
    centre / i[lobes[0]]
}

#[test]
fn gaussian_input_brightens_the_central_lobe() {
    let layout = HologramLayout::default();
    let target = pump_field(&three_peak_pump(), &layout.crystal_coordinates()).unwrap();
    let holo = encode_hologram(&target, &layout).unwrap();
    let flat = simulate_first_order(&holo, &layout.input_beam(None).unwrap(), &layout).unwrap();
    let beam = simulate_first_order(&holo, &layout.input_beam(Some(4000.0)).unwrap(), &layout).unwrap();
    let (rf, rg) = (lobe_ratio(&flat), lobe_ratio(&beam));
    assert!(rg > rf, "gaussian {rg} flat {rf}");
}

#[test]
fn eight_bit_quantization_barely_matters() {
    let layout = HologramLayout {
        height_px: 1,
        ..Default::default()
    };
    let target = pump_field(&three_peak_pump(), &layout.crystal_coordinates()).unwrap();
    let input = layout.input_beam(None).unwrap();
    let continuous = simulate_order(&encode_phase(&target, &layout).unwrap(), &input, &layout, 1).unwrap();
    let quantized = simulate_first_order(&encode_hologram(&target, &layout).unwrap(), &input, &layout).unwrap();
    let a = overlap(&continuous.samples, &target.samples);
    let b = overlap(&quantized.samples, &target.samples);
    assert!((a - b).abs() < 1e-3, "{a} {b}");
}

#[test]
fn pgm_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zeros.pgm");
    let holo = HologramImage {
        width: 16,
        height: 16,
        levels: vec![0; 256],
    };
    export_pgm(&holo, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let header = b"P5\n16 16\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    assert_eq!(bytes.len(), header.len() + 256);
    assert!(bytes[header.len()..].iter().all(|&b| b == 0));
    assert_eq!(import_pgm(&path).unwrap(), holo);

    let layout = HologramLayout {
        width_px: 64,
        height_px: 3,
        ..Default::default()
    };
    let xs = layout.crystal_coordinates();
    let target = biphoton::FieldProfile1D::from_real(xs.clone(), xs.iter().map(|x| (-(x / 10.0).powi(2)).exp())).unwrap();
    let holo = encode_hologram(&target, &layout).unwrap();
    export_pgm(&holo, &path).unwrap();
    assert_eq!(import_pgm(&path).unwrap(), holo);
}

#[test]
fn missing_pgm_reports_its_path() {
    let e = import_pgm(std::path::Path::new("/nonexistent/holo.pgm")).unwrap_err();
    assert!(e.to_string().contains("holo.pgm"));
}
