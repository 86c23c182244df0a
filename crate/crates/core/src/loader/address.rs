//! Multi-level code addresses.
//!
//! An address is a sequence of integers whose first and last digits are
//! nonzero. Addresses compare digit by digit from the front, padding the
//! shorter sequence with zeros, so fresh addresses can always be allocated
//! between two neighbours by descending one more level.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Address(Vec<u32>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid address `{0}`")]
pub struct AddressError(pub String);

impl Address {
    /// The empty address. Used for the global scope.
    pub fn empty() -> Self {
        Address(Vec::new())
    }

    pub fn single(n: u32) -> Self {
        assert!(n > 0, "single-level address must be nonzero");
        Address(vec![n])
    }

    pub fn new(digits: Vec<u32>) -> Result<Self, AddressError> {
        let a = Address(digits);
        if a.is_valid() {
            Ok(a)
        } else {
            Err(AddressError(format!("{:?}", a.0)))
        }
    }

    pub fn digits(&self) -> &[u32] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        match (self.0.first(), self.0.last()) {
            (Some(&f), Some(&l)) => f != 0 && l != 0,
            _ => false,
        }
    }

    fn digit(&self, i: usize) -> u32 {
        self.0.get(i).copied().unwrap_or(0)
    }
}

/// Digit-wise comparison with zero padding of the shorter address.
pub fn compare_addresses(a: &Address, b: &Address) -> Ordering {
    let n = a.0.len().max(b.0.len());
    for i in 0..n {
        match a.digit(i).cmp(&b.digit(i)) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

impl Ord for Address {
    fn cmp(&self, other: &Self) -> Ordering {
        compare_addresses(self, other)
    }
}

impl PartialOrd for Address {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Returns `count` ascending addresses strictly between `lo` and `hi`.
///
/// Every result extends `lo` by one or more levels. When `hi` is `None` the
/// caller guarantees nothing lives below `lo`'s successor at deeper levels.
pub fn allocate_between(lo: &Address, hi: Option<&Address>, count: usize) -> Vec<Address> {
    debug_assert!(hi.is_none_or(|h| lo < h));
    // zeros needed so the first new digit sits below `hi`'s first differing digit
    let mut zeros = 0;
    if let Some(hi) = hi {
        let n = lo.0.len().max(hi.0.len());
        let first_diff = (0..n).find(|&i| lo.digit(i) != hi.digit(i));
        if let Some(i) = first_diff {
            if i >= lo.0.len() {
                zeros = i - lo.0.len() + 1;
            }
        }
    }
    (1..=count as u32)
        .map(|k| {
            let mut d = lo.0.clone();
            d.extend(std::iter::repeat_n(0, zeros));
            d.push(k);
            Address(d)
        })
        .collect()
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "-");
        }
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ".")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl FromStr for Address {
    type Err = AddressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "-" {
            return Ok(Address::empty());
        }
        let digits = s
            .split('.')
            .map(|p| p.parse::<u32>().map_err(|_| AddressError(s.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Address::new(digits).map_err(|_| AddressError(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a(d: &[u32]) -> Address {
        Address::new(d.to_vec()).unwrap()
    }

    #[test]
    fn comparison_examples() {
        assert_eq!(compare_addresses(&a(&[1, 2]), &a(&[1, 2])), Ordering::Equal);
        assert_eq!(compare_addresses(&a(&[1, 3]), &a(&[1, 2, 5])), Ordering::Greater);
        assert_eq!(compare_addresses(&a(&[2]), &a(&[2, 1])), Ordering::Less);
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(allocate_between(&a(&[3]), Some(&a(&[4])), 1), vec![a(&[3, 1])]);
        assert_eq!(allocate_between(&a(&[3, 1]), Some(&a(&[3, 2])), 1), vec![a(&[3, 1, 1])]);
        let got = allocate_between(&a(&[3]), Some(&a(&[3, 1])), 1);
        assert_eq!(got, vec![a(&[3, 0, 1])]);
        assert!(a(&[3]) < got[0] && got[0] < a(&[3, 1]));
    }

    #[test]
    fn rejects_zero_ends() {
        assert!(Address::new(vec![0, 1]).is_err());
        assert!(Address::new(vec![1, 0]).is_err());
        assert!(Address::new(vec![]).is_err());
        assert!(Address::new(vec![1, 0, 1]).is_ok());
    }

    #[test]
    fn parse_display() {
        let x: Address = "3.0.1".parse().unwrap();
        assert_eq!(x, a(&[3, 0, 1]));
        assert_eq!(x.to_string(), "3.0.1");
        assert!("3.0".parse::<Address>().is_err());
    }

    fn arb_address() -> impl Strategy<Value = Address> {
        (1u32..5, prop::collection::vec(0u32..4, 0..4), 1u32..5).prop_map(|(f, mid, l)| {
            let mut d = vec![f];
            d.extend(mid);
            d.push(l);
            Address::new(d).unwrap()
        })
    }

    proptest! {
        #[test]
        fn order_laws(x in arb_address(), y in arb_address(), z in arb_address()) {
            prop_assert_eq!(compare_addresses(&x, &x), Ordering::Equal);
            prop_assert_eq!(compare_addresses(&x, &y), compare_addresses(&y, &x).reverse());
            if x <= y && y <= z {
                prop_assert!(x <= z);
            }
            prop_assert_eq!(compare_addresses(&x, &y) == Ordering::Equal, x == y);
        }

        #[test]
        fn allocation_is_strictly_between(x in arb_address(), y in arb_address(), n in 1usize..6) {
            let (lo, hi) = match x.cmp(&y) {
                Ordering::Less => (x, y),
                Ordering::Greater => (y, x),
                Ordering::Equal => return Ok(()),
            };
            let got = allocate_between(&lo, Some(&hi), n);
            prop_assert_eq!(got.len(), n);
            let mut prev = lo.clone();
            for g in &got {
                prop_assert!(g.is_valid());
                prop_assert!(&prev < g);
                prev = g.clone();
            }
            prop_assert!(prev < hi);
        }
    }
}
