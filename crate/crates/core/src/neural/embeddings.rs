use std::io::BufRead;
use std::path::Path;

use super::tensor::Tensor;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Copies vectors from a word2vec text file into the rows of `table` for
/// tokens present in `vocab`. A leading `count dim` header line is skipped.
/// Returns the number of vocabulary rows filled.
pub fn load_word2vec<S: Scalar>(path: &Path, vocab: &Vocabulary, table: &mut Tensor<S>) -> Result<usize> {
    let (rows, dim) = table.dims2();
    let file = std::fs::File::open(path)?;
    let mut filled = vec![false; rows];
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let values: Vec<&str> = fields.collect();
        if n == 0 && values.len() == 1 && word.parse::<u64>().is_ok() && values[0].parse::<u64>().is_ok() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            msg,
        };
        if values.len() != dim {
            return Err(parse_err(format!("expected {} values, found {}", dim, values.len())));
        }
        let Some(id) = vocab.get(word) else { continue };
        if id >= rows {
            continue;
        }
        let row = &mut table.data_mut()[id * dim..(id + 1) * dim];
        for (slot, v) in row.iter_mut().zip(&values) {
            let x: f64 = v.parse().map_err(|_| parse_err(format!("bad number {v:?}")))?;
            *slot = S::from_f64_lossy(x);
        }
        filled[id] = true;
    }
    Ok(filled.iter().filter(|f| **f).count())
}
