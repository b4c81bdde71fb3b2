use fragvqa_web::{fragment_view, lr_schedule, train_demo_run, ClipSettings};

fn clip() -> ClipSettings {
    ClipSettings {
        seed: 3,
        shapes: 4,
        speed: 0.4,
        noise: 0.0,
    }
}

#[test]
fn fragment_view_buffers() {
    let v = fragment_view(&clip(), 160, 90, 3, 8, 16, 64).unwrap();
    assert_eq!(v.frame().len(), 160 * 90 * 4);
    assert_eq!(v.residual().len(), 160 * 90 * 4);
    for img in [v.resized(), v.frag_residual(), v.frag_frame()] {
        assert_eq!(img.len(), 64 * 64 * 4);
        assert!(img.chunks_exact(4).all(|px| px[3] == 255));
    }
    // T = ceil(64² / 16²) = 16 coordinate pairs.
    assert_eq!(v.coords().len(), 32);
}

#[test]
fn frame_zero_is_clamped_to_first_pair() {
    let a = fragment_view(&clip(), 64, 64, 0, 8, 8, 32).unwrap();
    let b = fragment_view(&clip(), 64, 64, 1, 8, 8, 32).unwrap();
    assert_eq!(a.frag_frame(), b.frag_frame());
}

#[test]
fn oversized_patch_is_an_error() {
    assert!(fragment_view(&clip(), 20, 20, 1, 8, 32, 64).is_err());
}

#[test]
fn schedule_decays_then_holds() {
    let lr = lr_schedule(0.01, 8, 0.75);
    assert_eq!(lr.len(), 8);
    assert_eq!(lr[0], 0.01);
    assert!(lr[1] < lr[0] && lr[5] < lr[1]);
    assert_eq!(&lr[6..], &[0.01, 0.01]);
}

#[test]
fn training_demo_runs() {
    let run = train_demo_run(20, 15, 1).unwrap();
    assert_eq!(run.dim, 3 * (48 + 24 + 24));
    assert_eq!(run.epochs.len(), 15);
    assert_eq!(run.points.len(), 20);
    assert_eq!(run.points.iter().filter(|p| p.2).count(), 4);
    let again = train_demo_run(20, 15, 1).unwrap();
    assert_eq!(run.points, again.points);
}
