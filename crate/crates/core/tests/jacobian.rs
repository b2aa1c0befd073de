use eitloc::forward::{ConductivityField, ContactModel, CurrentPatternSet, PatternScheme};
use eitloc::geometry::{generate_disk_mesh, tag_regions, ElectrodeSet, Mesh};
use eitloc::jacobian::{conductivity_jacobian, contact_jacobian, fd_jacobian, JacobianSet, Parameter};
use eitloc::EitError;
use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const RADIUS: f64 = 0.115;
const HALF_WIDTH: f64 = 0.005;
const SIGMA_BG: f64 = 0.0215;
const ZETA: f64 = 500.0;

struct Setup {
    mesh: Mesh,
    el: ElectrodeSet,
    sigma: ConductivityField,
    contact: ContactModel,
    patterns: CurrentPatternSet,
}

fn setup(h: f64) -> Setup {
    let (mesh, el) = generate_disk_mesh(RADIUS, 32, HALF_WIDTH, h).unwrap();
    let sigma = ConductivityField::homogeneous(mesh.n_nodes(), SIGMA_BG).unwrap();
    let contact = ContactModel::uniform(32, ZETA, HALF_WIDTH).unwrap();
    let patterns = PatternScheme::OddSkip(15).build(32).unwrap();
    Setup { mesh, el, sigma, contact, patterns }
}

fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |a, b| a.max(b.abs()))
}

fn column_error(analytic: &[f64], fd: &[f64]) -> f64 {
    max_abs(analytic.iter().zip(fd).map(|(a, b)| a - b)) / max_abs(fd.iter().copied())
}

fn column(m: &DMatrix<f64>, c: usize) -> Vec<f64> {
    m.column(c).iter().copied().collect()
}

#[test]
fn conductivity_jacobian_matches_finite_differences() {
    let s = setup(RADIUS / 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let nodes: Vec<usize> = sample(&mut rng, s.mesh.n_nodes(), 20).into_vec();
    let jac = conductivity_jacobian(&s.mesh, &s.el, &s.sigma, &s.contact, &s.patterns, &nodes).unwrap();
    let mut worst = 0.0f64;
    for (c, &j) in nodes.iter().enumerate() {
        let fd = fd_jacobian(&s.mesh, &s.el, &s.sigma, &s.contact, &s.patterns, Parameter::Conductivity(j), 1e-4 * SIGMA_BG)
            .unwrap();
        worst = worst.max(column_error(&column(&jac, c), &fd));
    }
    println!("conductivity Jacobian vs finite differences: {worst:.3e}");
    assert!(worst <= 1e-3);
}

#[test]
fn contact_jacobian_matches_finite_differences() {
    let s = setup(RADIUS / 10.0);
    let jac = contact_jacobian(&s.mesh, &s.el, &s.sigma, &s.contact, &s.patterns).unwrap();
    let mut worst = 0.0f64;
    for m in 0..32 {
        let fd = fd_jacobian(&s.mesh, &s.el, &s.sigma, &s.contact, &s.patterns, Parameter::Contact(m), 1e-3 * ZETA)
            .unwrap();
        worst = worst.max(column_error(&column(&jac, m), &fd));
    }
    println!("contact Jacobian vs finite differences: {worst:.3e}");
    assert!(worst <= 1e-3);
}

#[test]
fn finite_differences_converge_at_second_order() {
    let s = setup(RADIUS / 8.0);
    let j = s.mesh.n_nodes() / 3;
    let jac = conductivity_jacobian(&s.mesh, &s.el, &s.sigma, &s.contact, &s.patterns, &[j]).unwrap();
    let err = |step: f64| {
        let fd = fd_jacobian(&s.mesh, &s.el, &s.sigma, &s.contact, &s.patterns, Parameter::Conductivity(j), step).unwrap();
        column_error(&column(&jac, 0), &fd)
    };
    let ratio = err(0.4 * SIGMA_BG) / err(0.2 * SIGMA_BG);
    assert!((3.0..5.0).contains(&ratio), "conductivity ratio {ratio}");

    let cj = contact_jacobian(&s.mesh, &s.el, &s.sigma, &s.contact, &s.patterns).unwrap();
    let err = |step: f64| {
        let fd = fd_jacobian(&s.mesh, &s.el, &s.sigma, &s.contact, &s.patterns, Parameter::Contact(3), step).unwrap();
        column_error(&column(&cj, 3), &fd)
    };
    let ratio = err(0.4 * ZETA) / err(0.2 * ZETA);
    assert!((3.0..5.0).contains(&ratio), "contact ratio {ratio}");
}

#[test]
fn columns_have_zero_mean_blocks() {
    let s = setup(RADIUS / 10.0);
    let tags = tag_regions(&s.mesh, |p| p[1] > 0.0).unwrap();
    let set = JacobianSet::compute(&s.mesh, &s.el, &s.sigma, &s.contact, &s.patterns, &tags).unwrap();
    assert_eq!(set.roi.ncols(), tags.n_roi());
    assert_eq!(set.roni.ncols(), tags.n_roni());
    assert_eq!(set.contact.ncols(), 32);
    for jac in [&set.roi, &set.roni, &set.contact] {
        assert_eq!(jac.nrows(), 16 * 32);
        for col in jac.column_iter() {
            let scale = max_abs(col.iter().copied());
            for block in col.as_slice().chunks(32) {
                assert!(block.iter().sum::<f64>().abs() <= 1e-10 * scale.max(f64::MIN_POSITIVE));
            }
        }
    }
}

#[test]
fn power_response_is_nonpositive() {
    let s = setup(RADIUS / 10.0);
    let all: Vec<usize> = (0..s.mesh.n_nodes()).collect();
    let jac = conductivity_jacobian(&s.mesh, &s.el, &s.sigma, &s.contact, &s.patterns, &all).unwrap();
    for (l, p) in s.patterns.iter().enumerate() {
        for j in 0..all.len() {
            // Σ_m I_m ∂U_m/∂σ_j = −∫ φ_j |∇u|²
            let v: f64 = (0..32).map(|m| p[m] * jac[(l * 32 + m, j)]).sum();
            assert!(v <= 1e-20, "pattern {l}, node {j}: {v}");
        }
    }
}

#[test]
fn region_blocks_reassemble_full_jacobian() {
    let s = setup(RADIUS / 10.0);
    let tags = tag_regions(&s.mesh, |p| p[0].hypot(p[1]) < 0.1).unwrap();
    let set = JacobianSet::compute(&s.mesh, &s.el, &s.sigma, &s.contact, &s.patterns, &tags).unwrap();
    let all: Vec<usize> = (0..s.mesh.n_nodes()).collect();
    let full = conductivity_jacobian(&s.mesh, &s.el, &s.sigma, &s.contact, &s.patterns, &all).unwrap();
    for (c, &j) in tags.roi().iter().enumerate() {
        assert_eq!(set.roi.column(c), full.column(j));
    }
    for (c, &j) in tags.roni().iter().enumerate() {
        assert_eq!(set.roni.column(c), full.column(j));
    }
}

#[test]
fn inactive_far_contacts_are_less_sensitive() {
    let s = setup(RADIUS / 10.0);
    let jac = contact_jacobian(&s.mesh, &s.el, &s.sigma, &s.contact, &s.patterns).unwrap();
    // pattern 0 drives electrodes 1 and 16; electrodes 8 and 24 are far from both
    let block_norm = |m: usize| max_abs((0..32).map(|k| jac[(k, m)]));
    for quiet in [8, 24] {
        for active in [1, 16] {
            assert!(block_norm(quiet) < block_norm(active), "{quiet} vs {active}");
        }
    }
}

#[test]
fn mirrored_sensitivities_agree() {
    let s = setup(RADIUS / 20.0);
    // pattern (0, 16) is fixed by y -> -y, which maps electrode m to 32 - m
    let patterns = eitloc::forward::build_current_patterns(32, &[(0, 16)]).unwrap();
    let all: Vec<usize> = (0..s.mesh.n_nodes()).collect();
    let jac = conductivity_jacobian(&s.mesh, &s.el, &s.sigma, &s.contact, &patterns, &all).unwrap();
    let mass = s.mesh.mass_matrix();
    let lumped: Vec<f64> = (0..s.mesh.n_nodes()).map(|i| mass.row(i).map(|(_, v)| v).sum()).collect();
    // Gaussian-weighted sensitivity density, insensitive to node placement
    let density = |c: [f64; 2], m: usize| {
        let (mut num, mut den) = (0.0, 0.0);
        for (j, q) in s.mesh.nodes().iter().enumerate() {
            let g = (-((q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2)) / (2.0 * 0.006f64.powi(2))).exp();
            num += g * jac[(m, j)];
            den += g * lumped[j];
        }
        num / den
    };
    for p in [[0.03, 0.04], [-0.05, 0.02], [0.0, 0.06]] {
        let a: Vec<f64> = (0..32).map(|m| density(p, m)).collect();
        let b: Vec<f64> = (0..32).map(|m| density([p[0], -p[1]], (32 - m) % 32)).collect();
        let scale = max_abs(a.iter().copied());
        for m in 0..32 {
            assert!((a[m] - b[m]).abs() < 0.02 * scale, "{p:?}, electrode {m}: {} vs {}", a[m], b[m]);
        }
    }
}

#[test]
fn invalid_nodes_are_rejected() {
    let s = setup(RADIUS / 6.0);
    let n = s.mesh.n_nodes();
    let r = conductivity_jacobian(&s.mesh, &s.el, &s.sigma, &s.contact, &s.patterns, &[0, n]);
    assert!(matches!(r, Err(EitError::Input(_))));
    let r = fd_jacobian(&s.mesh, &s.el, &s.sigma, &s.contact, &s.patterns, Parameter::Conductivity(0), SIGMA_BG);
    assert!(matches!(r, Err(EitError::Input(_))));
}
