use sha2::{Digest, Sha256};

use super::{l2_normalize, BackendError, EmbeddingBackend};

/// Signed feature hashing over lowercase alphanumeric tokens.
#[derive(Debug, Clone)]
pub struct HashedBow {
    dim: usize,
}

impl HashedBow {
    pub fn new(dim: usize) -> Result<Self, BackendError> {
        if dim == 0 {
            return Err(BackendError::Config("embedding dimension must be positive".into()));
        }
        Ok(HashedBow { dim })
    }

    pub fn tokens(text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .collect()
    }

    /// Bucket from one hash of the token, sign from a second, independent one.
    fn slot(&self, token: &str) -> (usize, f64) {
        let h = Sha256::digest(token.as_bytes());
        let bucket = u64::from_le_bytes(h[..8].try_into().expect("8 bytes")) % self.dim as u64;
        let mut signer = Sha256::new();
        signer.update([0x01]);
        signer.update(token.as_bytes());
        let s = signer.finalize();
        let sign = if s[0] & 1 == 0 { 1.0 } else { -1.0 };
        (bucket as usize, sign)
    }
}

impl Default for HashedBow {
    fn default() -> Self {
        HashedBow { dim: 256 }
    }
}

impl EmbeddingBackend for HashedBow {
    fn id(&self) -> String {
        format!("hashed_bow-{}", self.dim)
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::EmptyText);
        }
        let mut v = vec![0.0; self.dim];
        for t in Self::tokens(text) {
            let (i, s) = self.slot(&t);
            v[i] += s;
        }
        l2_normalize(&mut v)?;
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent re-derivation of the hashing rule.
    fn oracle(text: &str, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0f64; dim];
        for tok in text.to_lowercase().split(|c: char| !c.is_alphanumeric()) {
            if tok.is_empty() {
                continue;
            }
            let h = Sha256::digest(tok.as_bytes());
            let mut b = [0u8; 8];
            b.copy_from_slice(&h[0..8]);
            let idx = (u64::from_le_bytes(b) % dim as u64) as usize;
            let mut pre = vec![1u8];
            pre.extend_from_slice(tok.as_bytes());
            let s = Sha256::digest(&pre);
            v[idx] += if s[0] % 2 == 0 { 1.0 } else { -1.0 };
        }
        let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect()
    }

    #[test]
    fn matches_oracle_and_is_order_invariant() {
        let e = HashedBow::default();
        let a = e.embed("collect log").unwrap();
        assert_eq!(a, oracle("collect log", 256));
        assert_eq!(a, e.embed("log collect").unwrap());
        assert_eq!(a, e.embed("Collect   LOG!").unwrap());
        let b = e.embed("collect logs").unwrap();
        let cos: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let expected: f64 = oracle("collect log", 256).iter().zip(oracle("collect logs", 256)).map(|(x, y)| x * y).sum();
        assert!((cos - expected).abs() < 1e-12);
        assert!(cos >= 0.0);
    }

    #[test]
    fn errors() {
        let e = HashedBow::default();
        assert_eq!(e.embed(""), Err(BackendError::EmptyText));
        assert_eq!(e.embed("   "), Err(BackendError::EmptyText));
        assert_eq!(e.embed("!!! ---"), Err(BackendError::ZeroEmbedding));
        assert!(HashedBow::new(0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn unit_norm(text in "[a-z0-9 ]{0,40}[a-z][a-z0-9 _.,]{0,40}") {
            let e = HashedBow::default();
            match e.embed(&text) {
                Ok(v) => {
                    let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    prop_assert!((n - 1.0).abs() < 1e-9);
                    prop_assert_eq!(v, e.embed(&text).unwrap());
                }
                // Opposite-signed collisions can cancel exactly.
                Err(err) => prop_assert_eq!(err, BackendError::ZeroEmbedding),
            }
        }
    }
}
