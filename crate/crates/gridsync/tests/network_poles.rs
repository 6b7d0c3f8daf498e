use gridsync::linalg::eigenvalues;
use gridsync::network::*;
use gridsync::smallsignal::{ModeReport, Verdict};
use gridsync::timedomain::numerical_jacobian;
use gridsync::C64;

fn report(line_scale: f64) -> (WholeSystemModel, ModeReport) {
    let (top, devs) = ieee14(&Ieee14Options { line_scale, ..Default::default() });
    let m = assemble(top, devs).unwrap();
    let r = ModeReport::from_poles(eigenvalues(&m.a).unwrap()).unwrap();
    (m, r)
}

#[test]
fn nodal_matrix_is_symmetric() {
    let (top, _) = ieee14(&Ieee14Options::default());
    let y = nodal_admittance(&top).unwrap();
    let s = C64::new(0.3, 40.0);
    let n = top.buses.len();
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (y.entry_dqpm(i, j).eval(s), y.entry_dqpm(j, i).eval(s));
            for r in 0..2 {
                for c in 0..2 {
                    assert!((a[r][c] - b[r][c]).norm() < 1e-12, "Y[{i}][{j}] != Y[{j}][{i}]");
                }
            }
        }
    }
}

#[test]
fn poles_come_in_conjugate_pairs() {
    let (_, r) = report(1.0);
    for p in r.poles.iter().filter(|p| p.im.abs() > 1e-9) {
        let mirror = r.poles.iter().map(|q| (q - p.conj()).norm()).fold(f64::INFINITY, f64::min);
        assert!(mirror < 1e-8 * p.norm().max(1.0), "{p} has no conjugate");
    }
}

#[test]
fn shortened_lines_destabilize_and_reverting_restores() {
    let (_, base) = report(1.0);
    let (_, short) = report(0.2);
    assert_eq!(base.verdict, Verdict::Stable);
    assert_eq!(short.verdict, Verdict::Unstable);
    let f = short.frequency_hz;
    assert!((17.3 * 0.7..=17.3 * 1.3).contains(&f), "unstable pair at {f} Hz");
    let (_, back) = report(1.0);
    assert_eq!(back.verdict, Verdict::Stable);
}

#[test]
fn linearization_matches_finite_differences_of_the_simulator() {
    let (top, devs) = ieee14(&Ieee14Options { line_scale: 0.2, ..Default::default() });
    let mut sys = System::new(top, devs).unwrap();
    let eq = sys.equilibrium(None).unwrap();
    let num = numerical_jacobian(&sys, &eq.x);
    let model = linearize(&sys, eq).unwrap();
    let pick = |z: Vec<C64>| z.into_iter().filter(|p| p.im > 1e-6).max_by(|a, b| a.re.total_cmp(&b.re)).unwrap();
    let a = pick(eigenvalues(&model.a).unwrap());
    let b = pick(eigenvalues(&num).unwrap());
    assert!((a - b).norm() / b.norm() < 1e-3, "{a} vs {b}");
}

#[test]
fn ieee14_layout() {
    let (top, devs) = ieee14(&Ieee14Options::default());
    assert_eq!(top.buses.len(), 14);
    assert_eq!(top.lines.len(), 20);
    let names: Vec<(&str, usize)> = devs.iter().map(|d| (d.name.as_str(), d.bus)).collect();
    assert_eq!(names, [("gfm1", 1), ("gfm3", 3), ("gfm6", 6), ("gfl2", 2), ("gfl8", 8)]);
    let l = &top.lines[top.line_index(1, 2).unwrap()];
    assert!((l.x - 0.05917).abs() < 1e-12);
}
