use anisoshape::forms::HomogeneousForm;
use anisoshape::shape::shape_ellipse;

fn main() {
    // x^2y^2 family
    let base = HomogeneousForm::new(vec![0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
    let r = shape_ellipse(&base).unwrap();
    println!("x2y2: area {} (expect {}), capped {}", r.area, 2.0*std::f64::consts::PI, r.capped);
    for eps in [0.01, 0.1, 0.5, 1.0] {
        let pi = HomogeneousForm::new(vec![0.0, 0.0, 1.0, 0.0, -eps]).unwrap();
        let r = shape_ellipse(&pi).unwrap();
        let s_minus = std::f64::consts::PI * (2.0*(2.0_f64.sqrt()+1.0)).sqrt();
        println!("eps={eps}: area {} (expect {}), value {}", r.area, s_minus, r.value);
    }
    let plus = HomogeneousForm::new(vec![0.0, 0.0, 1.0, 0.0, 0.5]).unwrap();
    let r = shape_ellipse(&plus).unwrap();
    println!("t=+0.5: area {} (expect {}), capped {}", r.area, 2.0*std::f64::consts::PI, r.capped);
}
