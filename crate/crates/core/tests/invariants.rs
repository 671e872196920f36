mod common;

use common::invariants::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn kernel_is_reciprocal(case in reciprocity_cases()) {
        check_reciprocity(case)?;
    }

    #[test]
    fn fmm_sum_is_linear(case in linearity_cases()) {
        check_linearity(case)?;
    }

    #[test]
    fn traversal_covers_each_pair_once(case in cover_cases()) {
        check_once_cover(case)?;
    }

    #[test]
    fn gmres_reports_true_residual(case in gmres_cases()) {
        check_true_residual(case)?;
    }

    #[test]
    fn quadrature_converges(case in quadrature_cases()) {
        check_quadrature_convergence(case)?;
    }
}
