use hvsisp_core::pipeline::DenoiseMethod;
use hvsisp_web::demo::{color_difference, flicker, moving_disc_voxels, render_chart, RenderOptions};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn corrected_render_beats_uncorrected() {
    let small = RenderOptions {
        width: 192,
        height: 128,
        ..RenderOptions::default()
    };
    let good = render_chart(&small).unwrap();
    assert_eq!(good.rgba.len(), 192 * 128 * 4);
    assert!(good.rgba.chunks(4).all(|p| p[3] == 255));
    let good_de = parse(&good.summary)["mean_delta_e00"].as_f64().unwrap();
    assert!(good_de < 1.0, "{good_de}");

    let raw_look = render_chart(&RenderOptions {
        white_balance: false,
        color_correction: false,
        ..small.clone()
    })
    .unwrap();
    let summary = parse(&raw_look.summary);
    assert!(summary["mean_delta_e00"].as_f64().unwrap() > good_de + 2.0);
    assert!(summary["wb_gains"].is_null());

    let noisy = render_chart(&RenderOptions {
        noise: 0.02,
        denoise: DenoiseMethod::Bilateral,
        ..small
    })
    .unwrap();
    assert!(parse(&noisy.summary)["stages"].as_array().unwrap().iter().any(|s| s == "denoise"));
}

#[test]
fn bad_geometry_is_an_error() {
    let opts = RenderOptions {
        width: 15,
        ..RenderOptions::default()
    };
    assert!(render_chart(&opts).is_err());
}

#[test]
fn flicker_panel_finds_mains_frequency() {
    let doc = parse(&flicker(120.0, 0.6, 400).unwrap());
    assert!((doc["dominant_frequency"].as_f64().unwrap() - 120.0).abs() <= 2.5);
    assert_eq!(doc["flickering"], true);
    assert_eq!(doc["counts"].as_array().unwrap().len(), 400);
    let steady = parse(&flicker(120.0, 0.0, 400).unwrap());
    assert_eq!(steady["flickering"], false);
    assert!(flicker(100.0, 1.5, 400).is_err());
}

#[test]
fn moving_disc_has_both_polarities() {
    let grid = moving_disc_voxels(48, 32, 4.0, 0.2, 3).unwrap();
    assert_eq!(grid.values.len(), 3 * 48 * 32);
    assert!(grid.values.iter().any(|&v| v > 0.0));
    assert!(grid.values.iter().any(|&v| v < 0.0));
    let still = moving_disc_voxels(48, 32, 0.0, 0.2, 3).unwrap();
    assert!(still.values.iter().all(|&v| v == 0.0));
}

#[test]
fn color_difference_is_symmetric_and_zero_on_equal() {
    let same = parse(&color_difference([10, 200, 30], [10, 200, 30]));
    assert_eq!(same["delta_e00"], 0.0);
    let ab = parse(&color_difference([200, 30, 30], [30, 30, 200]));
    let ba = parse(&color_difference([30, 30, 200], [200, 30, 30]));
    assert!((ab["delta_e00"].as_f64().unwrap() - ba["delta_e00"].as_f64().unwrap()).abs() < 1e-9);
    let white = parse(&color_difference([255, 255, 255], [0, 0, 0]));
    assert!((white["lab1"][0].as_f64().unwrap() - 100.0).abs() < 1e-3);
}
