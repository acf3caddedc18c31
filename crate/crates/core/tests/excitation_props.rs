mod common;

use ltp_ddpc::datapipe::{collect_offline, hankel_depth, required_ppe_order};
use ltp_ddpc::excitation::{fundamental_check, is_ppe, periodic_hankel};
use ltp_ddpc::plant::{InputLaw, Plant};
use ltp_ddpc::testbed::gaussian_matrix;
use nalgebra::DVector;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn periodic_hankel_shape(q in 1usize..4, k in 1usize..6, period in 1usize..5, extra in 0usize..20, seed in any::<u64>()) {
        let len = k + extra;
        let z = gaussian_matrix(&mut common::rng(seed), q, len);
        let h = periodic_hankel(&z, k, period).unwrap();
        prop_assert_eq!(h.nrows(), q * k);
        prop_assert_eq!(h.ncols(), (len - k) / period + 1);
        // column j holds z at times jT .. jT + k - 1
        let j = h.ncols() - 1;
        for i in 0..k {
            prop_assert_eq!(h.view((i * q, j), (q, 1)).into_owned(), z.column(j * period + i).into_owned());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fundamental_lemma_lti(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=2, p in 1usize..=2, l in 1usize..=3) {
        let sys = common::system(seed, n, m, p, 1);
        let k = l + n;
        let len = (m + 1) * (k + n) + k + 10;
        let mut plant = Plant::new(sys.clone(), 0, DVector::zeros(n)).unwrap();
        let w = collect_offline(&mut plant, 0, len, InputLaw::Gaussian { variance: 1.0 }, seed).unwrap();
        prop_assert!(is_ppe(&w.u_matrix(), k + n, 1).unwrap());
        let check = fundamental_check(&sys, &w, k).unwrap();
        prop_assert!(check.holds, "{check:?}");
    }

    #[test]
    fn fundamental_lemma_ltp(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=2, p in 1usize..=2, period in 2usize..=3) {
        let sys = common::system(seed, n, m, p, period);
        let (l, h) = (n * period, period);
        let w = common::offline(&sys, l, h, -50, seed);
        prop_assert!(is_ppe(&w.u_matrix(), required_ppe_order(l, h, period, n), period).unwrap());
        let check = fundamental_check(&sys, &w, hankel_depth(l, h, period)).unwrap();
        prop_assert!(check.holds, "{check:?}");
    }
}
