//! Dense factors over discrete variables. The last scope variable varies fastest.

use crate::model::{Cpt, NetworkSchema};

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

fn strides_of(cards: &[usize]) -> Vec<usize> {
    let mut strides = vec![0; cards.len()];
    let mut acc = 1;
    for i in (0..cards.len()).rev() {
        strides[i] = acc;
        acc *= cards[i];
    }
    strides
}

/// Walks every assignment of `cards` in lexicographic order, calling `f`
/// with the running offsets into each mapped table. `maps[t][d]` is the
/// stride of output digit `d` in table `t` (0 when the table lacks it).
fn walk<const T: usize>(cards: &[usize], maps: [&[usize]; T], mut f: impl FnMut([usize; T])) {
    let total: usize = cards.iter().product();
    if total == 0 {
        return;
    }
    let mut digits = vec![0usize; cards.len()];
    let mut offs = [0usize; T];
    for _ in 0..total {
        f(offs);
        for d in (0..cards.len()).rev() {
            digits[d] += 1;
            for t in 0..T {
                offs[t] += maps[t][d];
            }
            if digits[d] < cards[d] {
                break;
            }
            for t in 0..T {
                offs[t] -= maps[t][d] * cards[d];
            }
            digits[d] = 0;
        }
    }
}

impl Factor {
    pub fn new(vars: Vec<usize>, cards: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(vars.len(), cards.len());
        debug_assert_eq!(values.len(), cards.iter().product::<usize>());
        Self {
            vars,
            cards,
            values,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::new(Vec::new(), Vec::new(), vec![value])
    }

    /// Scope `parents..., node` with the CPT table laid out as is.
    pub fn from_cpt(cpt: &Cpt, schema: &NetworkSchema) -> Self {
        let mut vars = cpt.parents().to_vec();
        vars.push(cpt.node());
        let cards = vars.iter().map(|&v| schema.cardinality(v)).collect();
        Self::new(vars, cards, cpt.table().to_vec())
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn contains(&self, var: usize) -> bool {
        self.vars.contains(&var)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn scale(&mut self, k: f64) {
        self.values.iter_mut().for_each(|x| *x *= k);
    }

    fn map_into(&self, scope: &[usize]) -> Vec<usize> {
        let own = strides_of(&self.cards);
        scope
            .iter()
            .map(|v| self.vars.iter().position(|x| x == v).map_or(0, |i| own[i]))
            .collect()
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        for (v, c) in other.vars.iter().zip(&other.cards) {
            if !vars.contains(v) {
                vars.push(*v);
                cards.push(*c);
            }
        }
        let ma = self.map_into(&vars);
        let mb = other.map_into(&vars);
        let mut values = Vec::with_capacity(cards.iter().product());
        walk(&cards, [&ma[..], &mb[..]], |[ia, ib]| {
            values.push(self.values[ia] * other.values[ib]);
        });
        Factor::new(vars, cards, values)
    }

    pub fn sum_out(&self, var: usize) -> Factor {
        let Some(pos) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        let out_strides = strides_of(&cards);
        let mut to_out = Vec::with_capacity(self.vars.len());
        let mut j = 0;
        for i in 0..self.vars.len() {
            if i == pos {
                to_out.push(0);
            } else {
                to_out.push(out_strides[j]);
                j += 1;
            }
        }
        let mut values = vec![0.0; cards.iter().product()];
        let mut k = 0;
        walk(&self.cards, [&to_out[..]], |[io]| {
            values[io] += self.values[k];
            k += 1;
        });
        Factor::new(vars, cards, values)
    }

    /// Restricts `var` to `state` and drops it from the scope.
    pub fn reduce(&self, var: usize, state: usize) -> Factor {
        let Some(pos) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let own = strides_of(&self.cards);
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        let map = self.map_into(&vars);
        let base = state * own[pos];
        let mut values = Vec::with_capacity(cards.iter().product());
        walk(&cards, [&map[..]], |[i]| values.push(self.values[base + i]));
        Factor::new(vars, cards, values)
    }

    /// Reorders the scope to `order` (a permutation of the current scope).
    pub fn permute(&self, order: &[usize]) -> Factor {
        debug_assert_eq!(order.len(), self.vars.len());
        let map = self.map_into(order);
        let cards: Vec<usize> = order
            .iter()
            .map(|v| self.cards[self.vars.iter().position(|x| x == v).unwrap()])
            .collect();
        let mut values = Vec::with_capacity(self.values.len());
        walk(&cards, [&map[..]], |[i]| values.push(self.values[i]));
        Factor::new(order.to_vec(), cards, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_sum_out() {
        // f(A) = [0.7, 0.3]; g(A,B) = [[0.8,0.2],[0.4,0.6]]
        let f = Factor::new(vec![0], vec![2], vec![0.7, 0.3]);
        let g = Factor::new(vec![0, 1], vec![2, 2], vec![0.8, 0.2, 0.4, 0.6]);
        let fg = f.product(&g);
        assert_eq!(fg.vars(), &[0, 1]);
        let expect = [0.56, 0.14, 0.12, 0.18];
        for (a, b) in fg.values().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let b = fg.sum_out(0);
        assert_eq!(b.vars(), &[1]);
        assert!((b.values()[0] - 0.68).abs() < 1e-15);
        assert!((b.values()[1] - 0.32).abs() < 1e-15);
    }

    #[test]
    fn reduce_and_permute() {
        let g = Factor::new(vec![0, 1], vec![2, 3], vec![1., 2., 3., 4., 5., 6.]);
        assert_eq!(g.reduce(0, 1).values(), &[4., 5., 6.]);
        assert_eq!(g.reduce(1, 2).values(), &[3., 6.]);
        let p = g.permute(&[1, 0]);
        assert_eq!(p.values(), &[1., 4., 2., 5., 3., 6.]);
        assert_eq!(p.permute(&[0, 1]), g);
    }

    #[test]
    fn product_with_disjoint_scope_is_outer_product() {
        let a = Factor::new(vec![3], vec![2], vec![1., 2.]);
        let b = Factor::new(vec![1], vec![2], vec![10., 20.]);
        assert_eq!(a.product(&b).values(), &[10., 20., 20., 40.]);
        assert_eq!(Factor::scalar(2.0).product(&a).values(), &[2., 4.]);
    }
}
