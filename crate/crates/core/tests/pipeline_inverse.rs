use hvsisp_core::calibration::DarkCalibration;
use hvsisp_core::color::{patch_centers, srgb_encode, PatchColors};
use hvsisp_core::pipeline::{run_isp, CcmMode, IspConfig, IspInputs, WbMode};
use hvsisp_core::synth::ChartScene;

fn reference() -> PatchColors {
    PatchColors::read_reference(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/colorchecker_srgb.json")).unwrap()
}

#[test]
fn inverted_scene_is_reproduced_per_pixel() {
    let mut scene = ChartScene::new(384, 256, reference());
    scene.bit_depth = 16;
    scene.exposure = 1.0;
    scene.blc = 64.0 * 64.0;
    let raw = scene.capture().unwrap();

    let mut config = IspConfig::default();
    config.wb.mode = WbMode::Fixed { gains: scene.gains };
    config.ccm.mode = CcmMode::File;
    config.highlight.enabled = false;
    let inputs = IspInputs {
        calibration: Some(DarkCalibration {
            blc: scene.blc,
            fpn: scene.fpn.clone(),
        }),
        ccm: Some(scene.ccm),
        ..IspInputs::default()
    };
    let (img, _) = run_isp(&raw, &config, &inputs).unwrap();

    let centers = patch_centers(&scene.annotation().unwrap()).unwrap();
    // patch fill spans ±38% of the cell; stay clear of interpolated borders
    let half = 0.38 * (centers[1][0] - centers[0][0]) - 4.0;
    let mut worst = 0f64;
    for (p, c) in centers.iter().enumerate() {
        let target = reference().colors()[p].map(srgb_encode);
        let (x0, x1) = ((c[0] - half).ceil() as usize, (c[0] + half).floor() as usize);
        let (y0, y1) = ((c[1] - half).ceil() as usize, (c[1] + half).floor() as usize);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let px = img.pixel(x, y);
                for ch in 0..3 {
                    worst = worst.max((px[ch] as f64 - target[ch]).abs());
                }
            }
        }
    }
    assert!(worst < 2.0 / 255.0, "max per-pixel error {worst}");
}
