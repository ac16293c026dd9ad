use nalgebra::DMatrix;

use eit_memory::model::C64;
use eit_memory::oracle::{
    build_exact, collective_operators, commutator, contiguous_partition, excitation_operator, ExactRegister, Level,
    ProductState,
};

fn max_entry(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

#[test]
fn raising_lowering_commutator_is_twice_tz() {
    for atoms in 1..=8usize {
        let reg = ExactRegister::new(vec![0.2; atoms], vec![1.0; atoms]).unwrap().with_caps(2, 2).unwrap();
        for groups in 1..=atoms.min(3) {
            let partition = contiguous_partition(atoms, groups).unwrap();
            let ops = collective_operators(&reg, &partition).unwrap();
            for i in 0..groups {
                for j in 0..groups {
                    let c = commutator(&ops.t_plus[i], &ops.t_minus[j]);
                    if i == j {
                        assert_eq!(c, ops.t_z[j].scale(2.0), "N={atoms}, m={groups}, group {i}");
                    } else {
                        assert_eq!(max_entry(&c), 0.0);
                    }
                }
            }
        }
    }
}

#[test]
fn spin_wave_commutator_deficit_is_two_n_over_n() {
    for atoms in 2..=8usize {
        let reg = ExactRegister::new(vec![0.2; atoms], vec![1.0; atoms]).unwrap().with_caps(1, 3).unwrap();
        let partition = contiguous_partition(atoms, 2).unwrap();
        let ops = collective_operators(&reg, &partition).unwrap();
        let basis = reg.basis();
        for (sigma, group) in partition.iter().enumerate() {
            let cc = commutator(&ops.c[sigma], &ops.c[sigma].adjoint());
            // c† on n flips needs room for n + 1 excitations under the cap
            for flips in 0..=group.len().min(2) {
                let mut s = ProductState::ground(0);
                for &atom in &group[..flips] {
                    s = s.with_level(atom, Level::C);
                }
                let i = basis.index_of(&s).unwrap();
                let deficit = 1.0 - cc[(i, i)].re;
                let expected = 2.0 * flips as f64 / group.len() as f64;
                assert!((deficit - expected).abs() < 1e-14, "N={atoms} σ={sigma} n={flips}: {deficit}");
            }
        }
    }
}

#[test]
fn phased_hamiltonian_is_hermitian_and_number_conserving() {
    let g = vec![0.3, 0.5, 0.1, 0.4, 0.2];
    let w = vec![1.0, 0.7, 1.3, 0.9, 1.1];
    let phases = vec![0.0, 1.1, 2.3, -0.4, 3.0];
    let reg = ExactRegister::with_phases(g, w, phases, 2, 2).unwrap();
    let h = build_exact(&reg).unwrap();
    let dense = h.matrix(3.7).unwrap();
    assert_eq!(dense, dense.adjoint());
    assert_eq!(max_entry(&commutator(&dense, &excitation_operator(&h.basis))), 0.0);
}

#[test]
fn dimension_budget_reports_the_dimension() {
    let err = ExactRegister::new(vec![0.1; 20], vec![1.0; 20]).unwrap_err();
    assert!(err.to_string().contains("42 states"), "{err}");
    let err = ExactRegister::with_phases(vec![0.1; 12], vec![1.0; 12], vec![0.0; 12], 6, 6).unwrap_err();
    assert!(err.to_string().starts_with("dimension over budget"), "{err}");
}
