use proptest::prelude::*;
use satstack_core::bell::{bell_eval, enumerate_partitions, faa_di_bruno, BellTable};

fn stirling2(k: usize, a: usize) -> f64 {
    // S(k, a) = a S(k − 1, a) + S(k − 1, a − 1)
    let mut t = vec![vec![0.0; k + 1]; k + 1];
    t[0][0] = 1.0;
    for i in 1..=k {
        for j in 1..=i {
            t[i][j] = j as f64 * t[i - 1][j] + t[i - 1][j - 1];
        }
    }
    t[k][a]
}

#[test]
fn ones_give_stirling_numbers_of_the_second_kind() {
    for k in 1..=10 {
        for a in 1..=k {
            assert_eq!(bell_eval(k, a, &[1.0; 10]).unwrap(), stirling2(k, a), "k={k} a={a}");
        }
    }
}

#[test]
fn index_sets_satisfy_both_constraints() {
    for k in 1..=10 {
        for a in 1..=k {
            for t in enumerate_partitions(k, a).unwrap() {
                assert_eq!(t.delta.len(), k - a + 1);
                assert_eq!(t.delta.iter().sum::<u32>() as usize, a);
                let w: usize = t.delta.iter().enumerate().map(|(l, &d)| (l + 1) * d as usize).sum();
                assert_eq!(w, k);
            }
        }
    }
}

#[test]
fn exponential_composition() {
    // d^k/dt^k exp(e^t − 1) at t = 0 is the k-th Bell number
    let bell = [1.0, 2.0, 5.0, 15.0, 52.0, 203.0];
    for (k, &b) in (1..=6).zip(&bell) {
        assert_eq!(faa_di_bruno(k, &[1.0; 6], &[1.0; 6]).unwrap(), b);
    }
}

proptest! {
    #[test]
    fn homogeneity(k in 1usize..8, a_off in 0usize..8, c in -3.0f64..3.0, xs in prop::collection::vec(-2.0f64..2.0, 8)) {
        // B_{k,a}(c x_1, c² x_2, …) = c^k B_{k,a}(x)
        let a = 1 + a_off % k;
        let scaled: Vec<f64> = xs.iter().enumerate().map(|(l, x)| c.powi(l as i32 + 1) * x).collect();
        let lhs = bell_eval(k, a, &scaled).unwrap();
        let rhs = c.powi(k as i32) * bell_eval(k, a, &xs).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
    }

    #[test]
    fn table_agrees_with_direct(k in 1usize..9, xs in prop::collection::vec(-2.0f64..2.0, 8)) {
        let table = BellTable::new(8).unwrap();
        for a in 1..=k {
            prop_assert_eq!(table.eval(k, a, &xs).unwrap(), bell_eval(k, a, &xs).unwrap());
        }
    }

    #[test]
    fn upper_evaluation_dominates(k in 1usize..8, xs in prop::collection::vec(-2.0f64..2.0, 8)) {
        let abs: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
        for a in 1..=k {
            let v = bell_eval(k, a, &xs).unwrap();
            let u = satstack_core::bell::bell_eval_upper(k, a, &abs).unwrap();
            prop_assert!(v.abs() <= u * (1.0 + 1e-12) + 1e-12);
        }
    }
}
