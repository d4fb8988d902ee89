//! Every file under examples/ runs and produces sensible output.

mod sparse_encoding {
    include!("../examples/sparse_encoding.rs");

    #[test]
    fn runs() {
        let d = run_example().unwrap();
        assert!(d[0] < d[1] && d[1] < d[2]);
    }
}

mod parallel_classes {
    include!("../examples/parallel_classes.rs");

    #[test]
    fn runs() {
        assert_eq!(run_example().unwrap(), 1);
    }
}

mod build_plan {
    include!("../examples/build_plan.rs");

    #[test]
    fn runs() {
        let p = run_example().unwrap();
        assert_eq!((p.n, p.delta(), p.ell), (12, 12, 3));
    }
}

mod resilience_metrics {
    include!("../examples/resilience_metrics.rs");

    #[test]
    fn runs() {
        assert!(run_example().unwrap().iter().all(|r| r.status.is_ok()));
    }
}

mod decode_partial {
    include!("../examples/decode_partial.rs");

    #[test]
    fn runs() {
        assert!(run_example().unwrap() < 1e-6);
    }
}

mod simulate_cluster {
    include!("../examples/simulate_cluster.rs");

    #[test]
    fn runs() {
        let rows = run_example().unwrap();
        assert!(rows.iter().all(|r| r.decoded == r.trials));
        // dense encodings make the polynomial plan the slowest
        assert!(rows[2].mean_time > rows[1].mean_time);
    }
}

mod condition_numbers {
    include!("../examples/condition_numbers.rs");

    #[test]
    fn runs() {
        let k = run_example().unwrap();
        assert!(k.windows(2).all(|w| w[0] < w[1]), "{k:?}");
    }
}

mod comparison_table {
    include!("../examples/comparison_table.rs");

    #[test]
    fn runs() {
        assert_eq!(run_example().unwrap().len(), 9);
    }
}
