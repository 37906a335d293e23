use std::sync::Arc;

use hysterix_core::feedback::ZeroFeedback;
use hysterix_core::hysteresis::{HysteresisController, Mode};
use hysterix_core::presets::{paper_local_certificate, PaperConstants};
use proptest::prelude::*;

fn controller(v_ell: f64, tilde: f64) -> HysteresisController {
    let pc = PaperConstants::published();
    let local = paper_local_certificate(&pc).unwrap().with_level(v_ell).unwrap();
    HysteresisController::new(Arc::new(local), Arc::new(ZeroFeedback), tilde).unwrap()
}

fn mode() -> impl Strategy<Value = Mode> {
    prop_oneof![Just(Mode::Local), Just(Mode::Global)]
}

proptest! {
    #[test]
    fn flow_and_jump_sets_cover_the_state_space(
        x in [-3.0f64..3.0, -3.0f64..3.0],
        q in mode(),
        v_ell in 1e-3f64..2.0,
        ratio in 0.01f64..0.99,
    ) {
        let c = controller(v_ell, ratio * v_ell);
        prop_assert!(c.in_c(q, &x).unwrap() || c.in_d(q, &x).unwrap());
        // The guard is the signed distance in level: D exactly where it is ≥ 0.
        prop_assert_eq!(c.in_d(q, &x).unwrap(), c.guard(q, &x).unwrap() >= 0.0);
    }

    #[test]
    fn jumps_land_in_the_flow_set_of_the_new_mode(
        x in [-3.0f64..3.0, -3.0f64..3.0],
        q in mode(),
        ratio in 0.01f64..0.99,
    ) {
        let c = controller(0.1042, ratio * 0.1042);
        if c.in_d(q, &x).unwrap() {
            let next = c.jump(q, &x).unwrap();
            prop_assert_eq!(next, q.toggled());
            prop_assert!(c.in_c(next, &x).unwrap());
            // Hysteresis: the new mode cannot jump straight back.
            prop_assert!(!c.in_d(next, &x).unwrap() || c.guard(next, &x).unwrap() == 0.0);
        } else {
            prop_assert!(c.jump(q, &x).is_err());
        }
    }

    #[test]
    fn feedback_refuses_states_outside_the_flow_set(
        x in [-3.0f64..3.0, -3.0f64..3.0],
        q in mode(),
    ) {
        let c = controller(0.1042, 0.05);
        prop_assert_eq!(c.feedback(q, &x).is_ok(), c.in_c(q, &x).unwrap());
    }
}
