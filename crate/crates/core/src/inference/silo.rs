//! Bounded weight-sorted multimap of candidate segments.

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    /// Inserted after evicting the oldest lowest-weight entry.
    Evicted,
    Duplicate,
    /// Silo full and the weight does not exceed the minimum.
    Rejected,
}

#[derive(Clone, Debug)]
pub struct SiloEntry<T> {
    pub weight: f64,
    pub key: String,
    pub value: T,
    seq: u64,
}

impl<T> SiloEntry<T> {
    pub fn seq(&self) -> u64 {
        self.seq
    }
}

/// Entries stay sorted by weight; equal weights keep insertion order, so
/// the head is always the oldest entry among the minimum weights.
#[derive(Clone, Debug)]
pub struct CodeTableSilo<T> {
    capacity: Option<usize>,
    entries: Vec<SiloEntry<T>>,
    next_seq: u64,
}

impl<T> CodeTableSilo<T> {
    /// `None` means unbounded.
    pub fn new(capacity: Option<usize>) -> Self {
        assert!(capacity.is_none_or(|m| m > 0), "silo capacity must be positive");
        CodeTableSilo { capacity, entries: Vec::new(), next_seq: 0 }
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.capacity.is_some_and(|m| self.entries.len() >= m)
    }

    pub fn entries(&self) -> &[SiloEntry<T>] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<SiloEntry<T>> {
        self.entries
    }

    pub fn min_weight(&self) -> Option<f64> {
        self.entries.first().map(|e| e.weight)
    }

    pub fn contains(&self, weight: f64, key: &str) -> bool {
        self.entries.iter().any(|e| e.weight == weight && e.key == key)
    }

    /// `key` identifies the segment structure.
    pub fn insert(&mut self, weight: f64, key: String, value: T) -> InsertOutcome {
        if self.contains(weight, &key) {
            return InsertOutcome::Duplicate;
        }
        let mut outcome = InsertOutcome::Inserted;
        if self.is_full() {
            let min = self.min_weight().expect("full silo has entries");
            if weight <= min {
                return InsertOutcome::Rejected;
            }
            self.entries.remove(0);
            outcome = InsertOutcome::Evicted;
        }
        let pos = self.entries.partition_point(|e| e.weight <= weight);
        let seq = self.next_seq;
        self.next_seq += 1;
        self.entries.insert(pos, SiloEntry { weight, key, value, seq });
        outcome
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(s: &CodeTableSilo<()>) -> Vec<(f64, String)> {
        s.entries().iter().map(|e| (e.weight, e.key.clone())).collect()
    }

    #[test]
    fn insert_into_empty() {
        let mut s = CodeTableSilo::new(Some(4));
        assert_eq!(s.insert(0.0, "e".into(), ()), InsertOutcome::Inserted);
        assert_eq!(keys(&s), [(0.0, "e".to_string())]);
    }

    #[test]
    fn eviction_and_rejection() {
        let mut s = CodeTableSilo::new(Some(2));
        s.insert(1.0, "a".into(), ());
        s.insert(2.0, "b".into(), ());
        let mut t = s.clone();
        assert_eq!(s.insert(3.0, "c".into(), ()), InsertOutcome::Evicted);
        assert_eq!(keys(&s), [(2.0, "b".to_string()), (3.0, "c".to_string())]);
        assert_eq!(t.insert(1.0, "c".into(), ()), InsertOutcome::Rejected);
        assert_eq!(keys(&t), [(1.0, "a".to_string()), (2.0, "b".to_string())]);
    }

    #[test]
    fn duplicates_and_equal_keys() {
        let mut s = CodeTableSilo::new(None);
        s.insert(1.0, "a".into(), ());
        assert_eq!(s.insert(1.0, "a".into(), ()), InsertOutcome::Duplicate);
        assert_eq!(s.insert(1.0, "b".into(), ()), InsertOutcome::Inserted);
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn evicts_oldest_of_minimum() {
        let mut s = CodeTableSilo::new(Some(2));
        s.insert(1.0, "old".into(), ());
        s.insert(1.0, "new".into(), ());
        s.insert(5.0, "x".into(), ());
        assert_eq!(keys(&s), [(1.0, "new".to_string()), (5.0, "x".to_string())]);
    }
}
