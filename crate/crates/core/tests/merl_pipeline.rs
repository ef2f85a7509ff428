use adaptive_brdf::render::{psnr, rmse, PSNR_CAP_DB};
use adaptive_brdf::{measure, plan_measurements, render_sphere, GgxParams, LobeModel, MerlBrdf, Rgb, SceneSpec, Warp};

#[test]
fn tabulated_file_renders_like_in_memory_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ggx.binary");
    let table = MerlBrdf::tabulate(&GgxParams::new(Rgb::new(0.1, 0.2, 0.3), 0.25));
    table.write(&path).unwrap();
    let back = MerlBrdf::read(&path).unwrap();
    let scene = SceneSpec::with_resolution(48).unwrap();
    assert_eq!(render_sphere(&back, &scene), render_sphere(&table, &scene));
}

#[test]
fn tabulated_reference_measures_close_to_analytic() {
    let ggx = GgxParams::new(Rgb::splat(0.3), 0.3);
    let table = MerlBrdf::tabulate(&ggx);
    let scene = SceneSpec::with_resolution(64).unwrap();
    let truth = render_sphere(&table, &scene);
    let plan = plan_measurements(Warp::with_default_weights(LobeModel::Ggx(ggx)), 16, 8).unwrap();
    let recon = render_sphere(&measure(&plan, &table), &scene);
    assert!(psnr(&recon, &truth).unwrap() > 25.0);
    assert!(rmse(&recon, &truth).unwrap() < PSNR_CAP_DB);
}
