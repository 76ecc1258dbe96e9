//! Dense-matrix reference simulator shared by the integration tests.

use num_complex::Complex64 as C;
use qmt_core::circuit::{BoundCircuit, GateKind};

type Mat = Vec<Vec<C>>;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn identity(n: usize) -> Mat {
    (0..n).map(|i| (0..n).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect()).collect()
}

fn kron(a: &Mat, b: &Mat) -> Mat {
    let (n, m) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); n * m]; n * m];
    for i in 0..n {
        for j in 0..n {
            for k in 0..m {
                for l in 0..m {
                    out[i * m + k][j * m + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

/// `U` on qubit `q` of `n`, qubit 0 leftmost in the tensor product.
fn lift(u: &Mat, q: usize, n: usize) -> Mat {
    let id = identity(2);
    (0..n).fold(identity(1), |m, k| kron(&m, if k == q { u } else { &id }))
}

/// |0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ U on (control, target).
fn controlled(u: &Mat, control: usize, target: usize, n: usize) -> Mat {
    let p0 = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]];
    let p1 = vec![vec![c(0.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
    let mut a = identity(1);
    let mut b = identity(1);
    for k in 0..n {
        let (fa, fb) = if k == control {
            (p0.clone(), p1.clone())
        } else if k == target {
            (identity(2), u.clone())
        } else {
            (identity(2), identity(2))
        };
        a = kron(&a, &fa);
        b = kron(&b, &fb);
    }
    a.iter().zip(&b).map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect()).collect()
}

fn single(kind: GateKind, theta: f64) -> Mat {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let t = theta / 2.0;
    match kind {
        GateKind::H => vec![vec![c(h, 0.0), c(h, 0.0)], vec![c(h, 0.0), c(-h, 0.0)]],
        GateKind::Rx => vec![vec![c(t.cos(), 0.0), c(0.0, -t.sin())], vec![c(0.0, -t.sin()), c(t.cos(), 0.0)]],
        GateKind::Rz | GateKind::Crz => vec![vec![C::from_polar(1.0, -t), c(0.0, 0.0)], vec![c(0.0, 0.0), C::from_polar(1.0, t)]],
        GateKind::Cnot => vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]],
    }
}

pub fn unitary(circ: &BoundCircuit) -> Mat {
    let n = circ.n_qubits;
    let mut u = identity(1 << n);
    for g in &circ.gates {
        let m = single(g.kind, g.param.unwrap_or(0.0));
        let step = if g.kind.arity() == 1 {
            lift(&m, g.qubits[0], n)
        } else {
            controlled(&m, g.qubits[0], g.qubits[1], n)
        };
        u = matmul(&step, &u);
    }
    u
}

/// First column of the circuit unitary: the state reached from |0…0⟩.
pub fn reference_state(circ: &BoundCircuit) -> Vec<C> {
    unitary(circ).into_iter().map(|row| row[0]).collect()
}
