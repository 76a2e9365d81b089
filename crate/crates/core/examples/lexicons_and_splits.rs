//! Loading lexicons and word vectors from text files, joining two lexicons
//! into a mapping dataset, and making a reproducible split.
//!
//! cargo run --example lexicons_and_splits

use std::fs;
use std::sync::Arc;

use emospace::data::{
    align, build_mapping_dataset, load_lexicon, load_word_vectors, ratio_policy, split_dataset, LexiconOptions,
    SplitSpec, VocabularyFilter,
};
use emospace::label::LabelFormat;

fn main() -> emospace::Result<()> {
    let dir = std::env::temp_dir().join("emospace-lexicons");
    fs::create_dir_all(&dir).map_err(|e| emospace::Error::Usage(e.to_string()))?;
    let write = |name: &str, text: &str| {
        let p = dir.join(name);
        fs::write(&p, text).expect("temp dir is writable");
        p
    };
    let vad_path = write(
        "vad.tsv",
        "word\tvalence\tarousal\tdominance\n\
         rollercoaster\t8.0\t8.1\t6.2\nurine\t2.4\t3.1\t4.6\ncat\t7.1\t3.8\t5.9\n\
         grief\t1.6\t4.9\t2.7\nsunrise\t7.9\t4.2\t6.4\n",
    );
    let be5_path = write(
        "be5.tsv",
        "word\tjoy\tanger\tsadness\tfear\tdisgust\n\
         rollercoaster\t3.4\t1.2\t1.1\t2.6\t1.0\nurine\t1.0\t1.5\t1.2\t1.1\t4.3\ndog\t4.0\t1.1\t1.1\t1.3\t1.0\n\
         grief\t1.0\t2.1\t4.9\t2.2\t1.1\nsunrise\t4.1\t1.0\t1.2\t1.0\t1.0\n",
    );
    let vec_path = write(
        "vectors.vec",
        "4 3\nrollercoaster 0.9 0.7 0.1\nurine -0.6 0.1 0.8\ncat 0.5 -0.2 0.0\nsunrise 0.8 0.1 -0.1\n",
    );

    let opts = LexiconOptions::default();
    let vad = load_lexicon(&vad_path, Arc::new(LabelFormat::vad()), &opts)?;
    let be5 = load_lexicon(&be5_path, Arc::new(LabelFormat::be5()), &opts)?;
    let pairs = build_mapping_dataset(&vad, &be5)?;
    println!("{} vad items, {} be5 items, {} shared", vad.len(), be5.len(), pairs.len());

    let vectors = load_word_vectors(&vec_path, Some(&VocabularyFilter::from_lexicons([&vad, &be5])))?;
    println!("{} vectors of dimension {}", vectors.len(), vectors.dim());

    let spec = split_dataset(&vad, ratio_policy(vad.len()), 42)?;
    println!("train {:?}\ndev   {:?}\ntest  {:?}", spec.train, spec.dev, spec.test);
    let path = SplitSpec::default_path(&vad_path);
    spec.save(&path)?;
    assert_eq!(SplitSpec::load(&path)?, spec);

    // words without a vector are dropped and counted
    let (train, oov) = align(&vad, &vectors, &spec.train)?;
    println!("{} training examples, {oov} without vectors", train.len());
    Ok(())
}
