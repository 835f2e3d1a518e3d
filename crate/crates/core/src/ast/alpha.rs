//! Alpha-equivalence of kernel statements.

use super::kernel::{Construct, Ident, Kernel};

/// True when the statements are equal up to a consistent renaming of bound
/// identifiers. Free identifiers must match by name.
pub fn alpha_eq(a: &Kernel, b: &Kernel) -> bool {
    Alpha { pairs: Vec::new() }.stmt(a, b)
}

struct Alpha {
    pairs: Vec<(Ident, Ident)>,
}

impl Alpha {
    fn ident(&self, x: Ident, y: Ident) -> bool {
        let left = self.pairs.iter().rev().find(|p| p.0 == x);
        let right = self.pairs.iter().rev().find(|p| p.1 == y);
        match (left, right) {
            (None, None) => x == y,
            (Some(l), Some(r)) => l.1 == y && r.0 == x,
            _ => false,
        }
    }

    fn idents(&self, xs: &[Ident], ys: &[Ident]) -> bool {
        xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| self.ident(*x, *y))
    }

    fn bind(&mut self, xs: &[Ident], ys: &[Ident]) -> bool {
        if xs.len() != ys.len() {
            return false;
        }
        self.pairs.extend(xs.iter().copied().zip(ys.iter().copied()));
        true
    }

    fn scoped(&mut self, xs: &[Ident], ys: &[Ident], a: &Kernel, b: &Kernel) -> bool {
        let mark = self.pairs.len();
        let ok = self.bind(xs, ys) && self.stmt(a, b);
        self.pairs.truncate(mark);
        ok
    }

    fn shape(c: &Construct, d: &Construct) -> bool {
        c.label == d.label
            && c.fields.len() == d.fields.len()
            && c.fields.iter().zip(&d.fields).all(|(f, g)| f.0 == g.0)
    }

    fn construct(&self, c: &Construct, d: &Construct) -> bool {
        Self::shape(c, d) && c.fields.iter().zip(&d.fields).all(|(f, g)| self.ident(f.1, g.1))
    }

    fn stmt(&mut self, a: &Kernel, b: &Kernel) -> bool {
        use Kernel as K;
        match (a, b) {
            (K::Skip, K::Skip) => true,
            (K::Eq(x1, y1), K::Eq(x2, y2)) => self.ident(*x1, *x2) && self.ident(*y1, *y2),
            (K::Bind(x1, c1), K::Bind(x2, c2)) => self.ident(*x1, *x2) && self.construct(c1, c2),
            (K::Seq(s1), K::Seq(s2)) => {
                s1.len() == s2.len() && s1.iter().zip(s2).all(|(a, b)| self.stmt(a, b))
            }
            (K::Local(xs, a), K::Local(ys, b)) => self.scoped(xs, ys, a, b),
            (K::If(x, a1, b1), K::If(y, a2, b2)) => {
                self.ident(*x, *y) && self.stmt(a1, a2) && self.stmt(b1, b2)
            }
            (K::Case(x, p1, a1, b1), K::Case(y, p2, a2, b2)) => {
                let xs: Vec<Ident> = p1.fields.iter().map(|f| f.1).collect();
                let ys: Vec<Ident> = p2.fields.iter().map(|f| f.1).collect();
                self.ident(*x, *y)
                    && Self::shape(p1, p2)
                    && self.scoped(&xs, &ys, a1, a2)
                    && self.stmt(b1, b2)
            }
            (K::Proc(p1, xs, a), K::Proc(p2, ys, b)) => {
                self.ident(*p1, *p2) && self.scoped(xs, ys, a, b)
            }
            (K::Apply(f1, xs), K::Apply(f2, ys)) => self.ident(*f1, *f2) && self.idents(xs, ys),
            (K::Thread(a), K::Thread(b)) => self.stmt(a, b),
            (K::ByNeed(p1, x1), K::ByNeed(p2, x2)) => {
                self.ident(*p1, *p2) && self.ident(*x1, *x2)
            }
            (K::Try(a1, x, h1), K::Try(a2, y, h2)) => {
                self.stmt(a1, a2) && self.scoped(&[*x], &[*y], h1, h2)
            }
            (K::Raise(x), K::Raise(y)) => self.ident(*x, *y),
            (K::NewName(x), K::NewName(y)) => self.ident(*x, *y),
            (K::IsDet(x1, y1), K::IsDet(x2, y2)) | (K::NewCell(x1, y1), K::NewCell(x2, y2)) => {
                self.ident(*x1, *x2) && self.ident(*y1, *y2)
            }
            (K::Exchange(a1, b1, c1), K::Exchange(a2, b2, c2)) => {
                self.idents(&[*a1, *b1, *c1], &[*a2, *b2, *c2])
            }
            (K::Space(o1, x1, y1), K::Space(o2, x2, y2)) => {
                o1 == o2 && self.ident(*x1, *x2) && self.ident(*y1, *y2)
            }
            _ => false,
        }
    }
}
