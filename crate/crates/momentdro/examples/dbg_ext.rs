use momentdro::moment::{extract_atoms, ExtractOptions, TMS};
use momentdro::poly::GradedBasis;

fn measure_tms(atoms: &[(f64, [f64; 2])], deg: u32) -> TMS {
    let basis = GradedBasis::new(2, deg);
    let mut vals = vec![0.0; basis.len()];
    for (w, pt) in atoms {
        for (i, e) in basis.exponents.iter().enumerate() {
            let mut m = 1.0;
            for (j, &pow) in e.0.iter().enumerate() {
                m *= pt[j].powi(pow as i32);
            }
            vals[i] += w * m;
        }
    }
    TMS::new(2, deg, vals)
}

fn main() {
    let atoms: Vec<(f64, [f64; 2])> = vec![
        (1.8437, [-0.8693, 0.0383]),
        (2.9456, [0.0308, -0.9100]),
        (2.1548, [-0.0274, 0.7513]),
        (2.3413, [0.8578, -0.0092]),
        (1.1, [0.1, 0.2]),
    ];
    let z = measure_tms(&atoms, 6);
    let opts = ExtractOptions { seed: 0, rank_tol: 1e-6 };
    match extract_atoms(&z, 3, 1, 5, &opts) {
        Ok(m) => {
            for a in &m.atoms {
                println!("atom {:.4} @ {:?}", a.0, a.1);
            }
            let got = m.moments(2, 6);
            let err: f64 = got
                .values
                .iter()
                .zip(&z.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            println!("roundtrip err: {err:.3e}");
        }
        Err(e) => println!("error: {e}"),
    }
}
