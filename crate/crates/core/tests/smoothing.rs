use sliprelax::fields::{curl_norm, Boundary, CurlMode, Grid3, PatchFrame, ScalarField3};
use sliprelax::smoothing::*;
use sliprelax::Error;

fn field(g: &Grid3, f: impl Fn([f64; 3]) -> f64 + Sync) -> ScalarField3 {
    ScalarField3::from_fn(g.clone(), PatchFrame::identity(), f).unwrap()
}

fn disc(cy: f64, cz: f64, r: f64) -> impl Fn([f64; 3]) -> f64 + Sync {
    move |p| if (p[1] - cy).hypot(p[2] - cz) < r { 1.0 } else { 0.0 }
}

fn tv(f: &ScalarField3) -> f64 {
    curl_norm(&[f], CurlMode::SingleSum, Boundary::Replicate).unwrap()
}

#[test]
fn cylinder_indicator_on_an_interior_patch() {
    let g = Grid3::new([1.0; 3], [8, 256, 256], [0.0; 3]).unwrap();
    let geom = PatchGeometry::new(field(&g, disc(0.5, 0.5, 0.45)), [[true; 2], [false; 2], [false; 2]]).unwrap();
    let c1 = field(&g, disc(0.5, 0.5, 0.3));
    let c2 = field(&g, |_| 0.0);
    let params = SmoothParams::default();
    let (out, report) = smooth_pipeline(&c1, &c2, &geom, &params).unwrap();
    let c = &report.components[0];
    assert!(tv(&out[0]) <= c.tv_in * 1.05);
    assert!(c.l1_drift <= 0.02, "{}", c.l1_drift);
    assert!(geom.support_margin(&out[0]).unwrap() >= report.margin);
}

#[test]
fn boundary_touching_half_disc() {
    let g = Grid3::new([1.0; 3], [8, 256, 256], [0.0; 3]).unwrap();
    let contact = [[true; 2], [false; 2], [true, false]];
    let geom = PatchGeometry::new(field(&g, disc(0.5, 0.0, 0.45)), contact).unwrap();
    let c1 = field(&g, disc(0.5, 0.0, 0.3));
    let c2 = c1.map(|v| -0.5 * v).unwrap();
    let (out, report) = smooth_pipeline(&c1, &c2, &geom, &SmoothParams::default()).unwrap();
    for (j, c) in report.components.iter().enumerate() {
        assert!(c.tv_out <= c.tv_in + c.budget);
        assert!(c.l1_drift <= 0.02, "{}", c.l1_drift);
        assert!(geom.support_margin(&out[j]).unwrap() >= report.margin);
    }
    // The slip still reaches the flagged face.
    assert!(out[0].at(4, 128, 0) > 0.9);
}

#[test]
fn patch_with_a_hole_exhausts_a_zero_budget() {
    // The patch fills the domain (all faces are contact faces) except for a
    // small hole; eroding around the hole lengthens its boundary, so the
    // cut-off must raise the curl and no radius can meet a zero budget.
    let g = Grid3::new([1.0; 3], [4, 96, 96], [0.0; 3]).unwrap();
    let ind = field(&g, |p| if (p[1] - 0.5).hypot(p[2] - 0.5) < 0.03 { 0.0 } else { 1.0 });
    let geom = PatchGeometry::new(ind.clone(), [[true; 2]; 3]).unwrap();
    let params = SmoothParams {
        budget_fraction: 0.0,
        kernel_radius: Some(4.0 * g.min_spacing()),
        margin: Some(0.04),
        ..SmoothParams::default()
    };
    match smooth_pipeline(&ind, &ind, &geom, &params) {
        Err(Error::Budget { retries, increase, .. }) => {
            println!("retries={retries} increase={increase}");
            assert!(increase > 0.0);
        }
        Ok((_, r)) => panic!("{}", serde_json::to_string_pretty(&r).unwrap()),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn reflection_matches_a_hand_summed_corner() {
    // A unit spike in the low corner: under half-sample reflection across
    // the three low faces, the corner value collects the kernel weights of
    // all offsets in {0, -1}^3.
    let g = Grid3::unit(12).unwrap();
    let spike = ScalarField3::from_fn(g.clone(), PatchFrame::identity(), |p| {
        if p.iter().all(|x| *x < 1.0 / 12.0) {
            1.0
        } else {
            0.0
        }
    })
    .unwrap();
    let k = MollifierKernel::new(2.5 * g.min_spacing(), &g, KernelProfile::default()).unwrap();
    let expected: f64 = k.weights().filter(|(o, _)| o.iter().all(|c| *c == 0 || *c == -1)).map(|(_, w)| w).sum();
    let faces = [[true, false]; 3];
    let out = mollify(&spike, &k, Extension::Reflect(faces)).unwrap();
    assert!((out.at(0, 0, 0) - expected).abs() < 1e-15, "{} vs {expected}", out.at(0, 0, 0));

    let ones = ScalarField3::constant(g, PatchFrame::identity(), 2.0);
    let out = mollify(&ones, &k, Extension::Reflect([[true; 2]; 3])).unwrap();
    assert!(out.values().iter().all(|v| (v - 2.0).abs() < 1e-14));
}
