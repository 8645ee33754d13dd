//! Reads the same small multi-label table from CSV and from ARFF.
//!
//! Run with `cargo run --example load_data`.

use mlme::dataset::{arff_attribute_names, parse_arff, parse_csv, Standardizer};

const CSV: &str = "\
0.5,1.2,1,0,1
-0.3,0.8,0,0,1
1.7,-0.4,1,1,0
";

const ARFF: &str = "\
% labels may sit anywhere among the attributes
@relation toy
@attribute amusing {0,1}
@attribute f0 numeric
@attribute f1 numeric
@attribute happy {0,1}
@attribute quiet {0,1}
@data
1,0.5,1.2,0,1
0,-0.3,0.8,0,1
1,1.7,-0.4,1,0
";

fn main() -> mlme::Result<()> {
    let csv = parse_csv(CSV, 3)?;
    println!("CSV: {} instances, m = {}, d = {}", csv.len(), csv.m(), csv.d());

    println!("ARFF attributes: {:?}", arff_attribute_names(ARFF)?);
    let labels: Vec<String> = ["amusing", "happy", "quiet"].map(String::from).into();
    let arff = parse_arff(ARFF, &labels)?;
    println!("ARFF matches CSV: {}", arff == csv);

    let z = Standardizer::fit(&csv).transform(&csv)?;
    for inst in z.iter() {
        // Index 0 is the constant bias feature.
        println!("{:?} -> {:?}", inst.features, inst.labels);
    }
    Ok(())
}
