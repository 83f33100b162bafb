#[path = "support/invariants.rs"]
mod support;

use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(160))]

    #[test]
    fn invariants_hold_at_every_event(s in support::setup()) {
        if let Err(e) = support::check(&s) {
            return Err(TestCaseError::fail(e));
        }
    }
}
