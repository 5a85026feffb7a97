//! Saves an SC model to a PCSW1 container and reloads it; loading it as an
//! MP model is refused.

use xtalnet::surrogate::{read_descriptor, MpDeepOnet, ScDeepOnet, TrunkConfig};

fn main() -> xtalnet::Result<()> {
    let model = ScDeepOnet::new(TrunkConfig::desk(), 9)?;
    let path = std::env::temp_dir().join("xtalnet-example-weights.pcsw");
    model.save(&path)?;
    println!("descriptor {}", serde_json::to_string(&read_descriptor(&path)?)?);
    let back = ScDeepOnet::load(&path)?;
    let same = back.params().iter().zip(model.params().iter()).all(|(a, b)| a.value == b.value);
    println!("{} trunk + {} branch parameters restored bitwise: {same}", back.trunk_param_count(), back.branch_param_count());
    match MpDeepOnet::load(&path) {
        Ok(_) => println!("unexpected: SC weights loaded as MP"),
        Err(e) => println!("MP load refused: {e}"),
    }
    Ok(())
}
