//! Label formats: min-max normalization, its inverse, and VA as a slice of
//! VAD.
//!
//! cargo run --example label_formats

use std::sync::Arc;

use emospace::label::{denormalize_label, normalize_label, project_format, LabelFormat, LabelVector};

fn main() -> emospace::Result<()> {
    let vad = Arc::new(LabelFormat::vad());
    let be5 = Arc::new(LabelFormat::be5());

    // "rollercoaster": valence 8.0 on [1, 9], joy 3.4 on [1, 5]
    let v = normalize_label(&LabelVector::raw(Arc::clone(&vad), vec![8.0, 6.9, 5.5])?)?;
    let b = normalize_label(&LabelVector::raw(Arc::clone(&be5), vec![3.4, 1.3, 1.1, 2.0, 1.0])?)?;
    println!("vad normalized {:?}", v.values());
    println!("be5 normalized {:?}", b.values());

    let va = project_format(&v, &Arc::new(LabelFormat::va()))?;
    println!("as va          {:?}", va.values());

    // predictions can overshoot; display values are clamped, the rest kept
    let over = LabelVector::prediction(Arc::clone(&vad), vec![1.08, 0.0, -0.5])?;
    let raw = denormalize_label(&over, &vad)?;
    println!("clamped {:?}, unclamped {:?}", raw.clamped.values(), raw.unclamped);

    // a dataset on its own scale, e.g. valence on [-3, 3]
    let custom = LabelFormat::new("val7", ["valence"], emospace::label::TargetInterval::Bipolar)?
        .with_uniform_range(-3.0, 3.0)?;
    println!("{}", custom.to_json());
    Ok(())
}
