//! Active records and storage locations.

use super::value::Value;
use crate::loader::Address;
use std::collections::BTreeMap;

/// Where a value lives.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Loc {
    Var(usize, String),
    /// Result slot of a line in a record.
    Temp(usize, Address),
}

#[derive(Clone, Debug, Default)]
pub struct ActiveRecord {
    pub scope: Address,
    pub vars: BTreeMap<String, Value>,
    pub temps: BTreeMap<Address, Value>,
    /// Formal parameter to the caller's storage.
    pub cross_ref: BTreeMap<String, Loc>,
    pub parent: Option<usize>,
    /// Parent-class instance records, leftmost first.
    pub query: Vec<usize>,
    pub is_instance: bool,
    pub alive: bool,
}

/// Arena of records; handles are indices.
#[derive(Clone, Debug, Default)]
pub struct RecordArena {
    pub records: Vec<ActiveRecord>,
    pub created: usize,
    pub destroyed: usize,
}

impl RecordArena {
    pub fn create(&mut self, scope: Address, parent: Option<usize>) -> usize {
        self.created += 1;
        self.records.push(ActiveRecord { scope, parent, alive: true, ..Default::default() });
        self.records.len() - 1
    }

    pub fn destroy(&mut self, r: usize) {
        let rec = &mut self.records[r];
        if rec.alive && !rec.is_instance {
            rec.alive = false;
            rec.temps.clear();
            self.destroyed += 1;
        }
    }

    pub fn get(&self, r: usize) -> &ActiveRecord {
        &self.records[r]
    }

    pub fn get_mut(&mut self, r: usize) -> &mut ActiveRecord {
        &mut self.records[r]
    }

    /// Variable `name` in `r` or, leftmost first, its parent-class records.
    pub fn find_member(&self, r: usize, name: &str) -> Option<Loc> {
        let rec = &self.records[r];
        if let Some(loc) = rec.cross_ref.get(name) {
            return Some(loc.clone());
        }
        if rec.vars.contains_key(name) {
            return Some(Loc::Var(r, name.to_string()));
        }
        rec.query.iter().find_map(|&q| self.find_member(q, name))
    }

    /// Name lookup from `r` outward through parent links.
    pub fn resolve(&self, r: usize, name: &str) -> Option<Loc> {
        let mut cur = Some(r);
        while let Some(c) = cur {
            if let Some(loc) = self.find_member(c, name) {
                return Some(loc);
            }
            cur = self.records[c].parent;
        }
        None
    }

    pub fn load(&self, loc: &Loc) -> Option<&Value> {
        match loc {
            Loc::Var(r, n) => self.records[*r].vars.get(n),
            Loc::Temp(r, a) => self.records[*r].temps.get(a),
        }
    }

    pub fn store(&mut self, loc: &Loc, v: Value) {
        match loc {
            Loc::Var(r, n) => {
                self.records[*r].vars.insert(n.clone(), v);
            }
            Loc::Temp(r, a) => {
                self.records[*r].temps.insert(a.clone(), v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_prefers_leftmost_parent() {
        let mut a = RecordArena::default();
        let g = a.create(Address::empty(), None);
        let left = a.create(Address::single(1), Some(g));
        let right = a.create(Address::single(2), Some(g));
        a.get_mut(left).vars.insert("v".into(), Value::Number(1.0));
        a.get_mut(right).vars.insert("v".into(), Value::Number(2.0));
        let inst = a.create(Address::single(3), Some(g));
        a.get_mut(inst).query = vec![left, right];
        let loc = a.resolve(inst, "v").unwrap();
        assert_eq!(a.load(&loc), Some(&Value::Number(1.0)));
    }

    #[test]
    fn instances_survive_destroy() {
        let mut a = RecordArena::default();
        let r = a.create(Address::single(1), None);
        a.get_mut(r).is_instance = true;
        a.destroy(r);
        assert!(a.get(r).alive);
        assert_eq!(a.destroyed, 0);
    }
}
