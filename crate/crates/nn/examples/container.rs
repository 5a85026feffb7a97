//! Writes named tensors with a JSON descriptor to a PCSW1 file and reads
//! them back.

use xtal_nn::container::{load, save};
use xtal_nn::Tensor;

fn main() -> xtal_nn::Result<()> {
    let dir = std::env::temp_dir().join("xtal-nn-container-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("weights.pcsw");
    let tensors = vec![
        ("layer.weight".to_string(), Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0])?),
        ("layer.bias".to_string(), Tensor::new(vec![3], vec![0.1, 0.2, 0.3])?),
    ];
    save(&path, &serde_json::json!({ "model": "demo", "hidden": 3 }), &tensors)?;
    let back = load(&path)?;
    println!("descriptor {}", back.descriptor);
    for (name, t) in &back.tensors {
        println!("{name} {:?} {:?}", t.shape(), t.data());
    }
    assert_eq!(back.tensors, tensors);
    Ok(())
}
