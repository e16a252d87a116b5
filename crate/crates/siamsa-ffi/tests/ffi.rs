//! Exercises the C ABI exactly as a foreign caller would: through raw
//! pointers and status codes.

use std::ffi::CStr;
use std::ptr;

use siamsa_ffi::{
    siamsa_last_error_message, siamsa_tracker_current_box, siamsa_tracker_free,
    siamsa_tracker_init, siamsa_tracker_new, siamsa_tracker_new_from_files, siamsa_tracker_track,
    siamsa_version, SiamsaBox, SiamsaStatus, SiamsaTracker,
};

/// Renders a frame through the library's synthetic generator and flattens
/// it to the interleaved RGB8 layout the ABI expects.
fn rgb8_frame(seed: u64, frame_index: usize) -> (Vec<u8>, u32, u32, SiamsaBox) {
    use siamsa::bench::synth::{render_frame, SynthSpec};
    let spec = SynthSpec {
        name: "ffi".into(),
        frames: 8,
        width: 160,
        height: 120,
        object: siamsa::tracker::BBox::new(60.0, 44.0, 36.0, 30.0),
        seed,
        ..SynthSpec::default()
    };
    let gt = spec.trajectory();
    let t = render_frame(&spec, &gt[frame_index], frame_index);
    let (h, w) = (t.shape()[1], t.shape()[2]);
    let mut bytes = vec![0u8; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                bytes[(y * w + x) * 3 + c] =
                    (t.at3(c, y, x) * 255.0).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    let b = gt[frame_index];
    (
        bytes,
        w as u32,
        h as u32,
        SiamsaBox {
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
        },
    )
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(siamsa_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn track_a_few_frames_through_the_abi() {
    let mut handle: *mut SiamsaTracker = ptr::null_mut();
    let status = unsafe { siamsa_tracker_new(7, true, true, &mut handle) };
    assert_eq!(status, SiamsaStatus::SiamsaOk, "{}", last_error());
    assert!(!handle.is_null());

    let (frame0, w, h, init_box) = rgb8_frame(3, 0);
    let status = unsafe { siamsa_tracker_init(handle, frame0.as_ptr(), w, h, init_box) };
    assert_eq!(status, SiamsaStatus::SiamsaOk, "{}", last_error());

    let mut current = SiamsaBox {
        x: 0.0,
        y: 0.0,
        w: 0.0,
        h: 0.0,
    };
    assert_eq!(
        unsafe { siamsa_tracker_current_box(handle, &mut current) },
        SiamsaStatus::SiamsaOk
    );
    assert_eq!(current, init_box);

    for idx in 1..4 {
        let (frame, w, h, _) = rgb8_frame(3, idx);
        let mut out = SiamsaBox {
            x: 0.0,
            y: 0.0,
            w: 0.0,
            h: 0.0,
        };
        let mut score = -1.0;
        let status =
            unsafe { siamsa_tracker_track(handle, frame.as_ptr(), w, h, &mut out, &mut score) };
        assert_eq!(status, SiamsaStatus::SiamsaOk, "{}", last_error());
        assert!(out.w > 0.0 && out.h > 0.0);
        assert!(out.x >= 0.0 && out.y >= 0.0);
        assert!(out.x + out.w <= 160.0 + 1e-9 && out.y + out.h <= 120.0 + 1e-9);
        assert!((0.0..=1.0).contains(&score));
    }
    unsafe { siamsa_tracker_free(handle) };
}

#[test]
fn same_seed_same_boxes_across_handles() {
    let run = || -> Vec<SiamsaBox> {
        let mut handle: *mut SiamsaTracker = ptr::null_mut();
        assert_eq!(
            unsafe { siamsa_tracker_new(42, true, false, &mut handle) },
            SiamsaStatus::SiamsaOk
        );
        let (frame0, w, h, init_box) = rgb8_frame(5, 0);
        assert_eq!(
            unsafe { siamsa_tracker_init(handle, frame0.as_ptr(), w, h, init_box) },
            SiamsaStatus::SiamsaOk
        );
        let mut boxes = Vec::new();
        for idx in 1..4 {
            let (frame, w, h, _) = rgb8_frame(5, idx);
            let mut out = SiamsaBox {
                x: 0.0,
                y: 0.0,
                w: 0.0,
                h: 0.0,
            };
            assert_eq!(
                unsafe {
                    siamsa_tracker_track(handle, frame.as_ptr(), w, h, &mut out, ptr::null_mut())
                },
                SiamsaStatus::SiamsaOk
            );
            boxes.push(out);
        }
        unsafe { siamsa_tracker_free(handle) };
        boxes
    };
    assert_eq!(run(), run());
}

#[test]
fn status_codes_cover_misuse() {
    // Null output handle.
    assert_eq!(
        unsafe { siamsa_tracker_new(0, true, true, ptr::null_mut()) },
        SiamsaStatus::SiamsaNullArgument
    );

    let mut handle: *mut SiamsaTracker = ptr::null_mut();
    assert_eq!(
        unsafe { siamsa_tracker_new(0, true, true, &mut handle) },
        SiamsaStatus::SiamsaOk
    );

    // Track before init.
    let (frame, w, h, _) = rgb8_frame(1, 0);
    assert_eq!(
        unsafe {
            siamsa_tracker_track(
                handle,
                frame.as_ptr(),
                w,
                h,
                ptr::null_mut(),
                ptr::null_mut(),
            )
        },
        SiamsaStatus::SiamsaInvalidState
    );
    assert!(last_error().contains("before"));

    // Null frame and degenerate box.
    assert_eq!(
        unsafe {
            siamsa_tracker_init(
                handle,
                ptr::null(),
                w,
                h,
                SiamsaBox {
                    x: 0.0,
                    y: 0.0,
                    w: 10.0,
                    h: 10.0,
                },
            )
        },
        SiamsaStatus::SiamsaNullArgument
    );
    assert_eq!(
        unsafe {
            siamsa_tracker_init(
                handle,
                frame.as_ptr(),
                w,
                h,
                SiamsaBox {
                    x: 5.0,
                    y: 5.0,
                    w: 0.0,
                    h: 10.0,
                },
            )
        },
        SiamsaStatus::SiamsaInvalidArgument
    );

    // Uninitialized current-box query.
    let mut out = SiamsaBox {
        x: 0.0,
        y: 0.0,
        w: 0.0,
        h: 0.0,
    };
    assert_eq!(
        unsafe { siamsa_tracker_current_box(handle, &mut out) },
        SiamsaStatus::SiamsaInvalidState
    );

    // Missing config file surfaces as a parse error.
    let mut h2: *mut SiamsaTracker = ptr::null_mut();
    let missing = std::ffi::CString::new("/definitely/not/here.cfg").unwrap();
    assert_eq!(
        unsafe { siamsa_tracker_new_from_files(missing.as_ptr(), ptr::null(), &mut h2) },
        SiamsaStatus::SiamsaParseError
    );

    // Free tolerates null; real handle frees cleanly.
    unsafe { siamsa_tracker_free(ptr::null_mut()) };
    unsafe { siamsa_tracker_free(handle) };
}

#[test]
fn generated_header_exists_and_declares_the_api() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("siamsa.h");
    let text = std::fs::read_to_string(&header).expect("build.rs must write include/siamsa.h");
    for needle in [
        "SIAMSA_H",
        "SiamsaStatus",
        "SiamsaBox",
        "SiamsaTracker",
        "siamsa_tracker_new",
        "siamsa_tracker_init",
        "siamsa_tracker_track",
        "siamsa_tracker_free",
        "siamsa_last_error_message",
        "siamsa_version",
    ] {
        assert!(text.contains(needle), "header is missing {needle}");
    }
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(siamsa_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
