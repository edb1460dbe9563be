use anisoshape::forms::HomogeneousForm;
use anisoshape::shape::shape_ellipse;
use anisoshape::metric::regime_thresholds;

fn main() {
    let disc = HomogeneousForm::new(vec![1.0, 0.0, 1.0]).unwrap();
    let r = shape_ellipse(&disc).unwrap();
    println!("x^2+y^2: area {} (pi = {}), matrix {:?}", r.area, std::f64::consts::PI, r.matrix);

    let neg = HomogeneousForm::new(vec![1.0, 0.0, 3.0, 0.0]).unwrap();
    let r = shape_ellipse(&neg).unwrap();
    println!("x(x^2+3y^2): area {} (expect {})", r.area, std::f64::consts::PI / 2.0_f64.cbrt());

    for (name, c) in [("x(x^2+3y^2)", vec![1.0, 0.0, 3.0, 0.0]), ("x(x^2-3y^2)", vec![1.0, 0.0, -3.0, 0.0]), ("x^3", vec![1.0, 0.0, 0.0, 0.0]), ("x^2y", vec![0.0, 1.0, 0.0, 0.0])] {
        let pi = HomogeneousForm::new(c).unwrap();
        let th = regime_thresholds(&pi).unwrap();
        println!("{name}: mu={} alpha*={} beta={}", th.mu, th.alpha_star, th.beta);
    }
}
