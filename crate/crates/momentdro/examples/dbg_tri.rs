use momentdro::io::ProblemFile;
use momentdro::moment::project_pi;
use momentdro::relax::{solve_order, solve_order_selected, DEFAULT_PSD_CAP};

fn main() {
    let problem = ProblemFile::read("crates/momentdro/problems/interval_quadratic.json".as_ref())
        .unwrap()
        .to_problem()
        .unwrap();
    let deg = problem.degrees();
    println!("degrees {:?}", deg);
    let k1 = (deg.d + 1).div_ceil(2).max(deg.d2);
    for k in deg.d0..=deg.d0 + 1 {
        let out = solve_order(&problem, k, k.max(k1), DEFAULT_PSD_CAP).unwrap();
        println!(
            "k={k} gamma {:.8} center w {:?} -> x {:?}",
            out.gamma_k,
            &out.w_center.values[..6],
            project_pi(&out.w_center)
        );
        let sel = solve_order_selected(&problem, k, k.max(k1), DEFAULT_PSD_CAP, 0).unwrap();
        println!(
            "k={k} selected w {:?} -> x {:?}",
            &sel.w_star.values[..6],
            project_pi(&sel.w_star)
        );
    }
}
