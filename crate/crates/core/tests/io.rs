use eitloc::forward::{ConductivityField, ContactModel, PatternScheme};
use eitloc::geometry::{generate_disk_mesh, tag_regions};
use eitloc::io::{read_jacobian, read_mesh, read_node_values, write_jacobian, write_mesh, write_node_values, MeshBundle};
use eitloc::jacobian::JacobianSet;
use eitloc::EitError;

fn bundle(h: f64) -> MeshBundle {
    let (mesh, electrodes) = generate_disk_mesh(0.115, 32, 0.005, h).unwrap();
    let tags = Some(tag_regions(&mesh, |p| p[1] > 0.0).unwrap());
    MeshBundle { mesh, electrodes, tags }
}

#[test]
fn mesh_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let b = bundle(0.115 / 10.0);
    let (p1, p2) = (dir.path().join("a.json"), dir.path().join("b.json"));
    write_mesh(&p1, &b).unwrap();
    let back = read_mesh(&p1).unwrap();
    write_mesh(&p2, &back).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    assert_eq!(back.mesh, b.mesh);
    assert_eq!(back.tags, b.tags);
    assert_eq!(back.electrodes.len(), 32);
    for m in 0..32 {
        assert_eq!(back.electrodes.edge_indices(m), b.electrodes.edge_indices(m));
    }
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p1).unwrap()).unwrap();
    assert_eq!(json["format"], "eitmesh-v1");
    for key in ["nodes", "triangles", "boundary_edges", "electrodes", "roi_nodes"] {
        assert!(json[key].is_array(), "{key}");
    }
}

#[test]
fn mesh_file_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(read_mesh(&dir.path().join("missing.json")), Err(EitError::Input(_))));

    let b = bundle(0.115 / 6.0);
    let text = b.to_json().unwrap();
    let wrong_version = text.replacen("eitmesh-v1", "eitmesh-v9", 1);
    assert!(matches!(MeshBundle::from_json(&wrong_version), Err(EitError::Format(_))));
    assert!(matches!(MeshBundle::from_json("{\"format\": \"eitmesh-v1\"}"), Err(EitError::Json(_))));

    // dropping a triangle breaks the stored boundary loop
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["triangles"].as_array_mut().unwrap().remove(0);
    assert!(MeshBundle::from_json(&v.to_string()).is_err());
}

#[test]
fn jacobian_dump_round_trip() {
    let b = bundle(0.115 / 6.0);
    let sigma = ConductivityField::homogeneous(b.mesh.n_nodes(), 0.0215).unwrap();
    let contact = ContactModel::uniform(32, 500.0, 0.005).unwrap();
    let patterns = PatternScheme::OddSkip(15).build(32).unwrap();
    let jac =
        JacobianSet::compute(&b.mesh, &b.electrodes, &sigma, &contact, &patterns, b.tags.as_ref().unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (bin, json) = write_jacobian(&dir.path().join("jac"), &jac).unwrap();
    let n_values = 512 * (b.mesh.n_nodes() + 32);
    assert_eq!(std::fs::metadata(&bin).unwrap().len() as usize, 8 * n_values);
    assert!(json.is_file());
    let back = read_jacobian(&dir.path().join("jac")).unwrap();
    assert_eq!(back.roi, jac.roi);
    assert_eq!(back.roni, jac.roni);
    assert_eq!(back.contact, jac.contact);
    assert_eq!(back.sigma0, jac.sigma0);
    assert_eq!(back.contact0, jac.contact0);

    std::fs::write(&bin, [0u8; 16]).unwrap();
    assert!(matches!(read_jacobian(&dir.path().join("jac")), Err(EitError::Format(_))));
}

#[test]
fn node_values_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("w.csv");
    let nodes = vec![3, 7, 11];
    let values = vec![0.1, -2.5e-7, std::f64::consts::PI];
    write_node_values(&p, &nodes, &values).unwrap();
    assert_eq!(read_node_values(&p).unwrap(), (nodes, values));
}
