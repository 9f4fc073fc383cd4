//! A group wrapper that counts scalar multiplications and element
//! comparisons, so per-message verification work can be measured rather
//! than asserted.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::group::{Group, GroupError, Scalar, ScalarField};

#[derive(Debug, Default)]
pub struct OpCounter {
    mults: AtomicUsize,
    comparisons: AtomicUsize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCounts {
    pub scalar_mults: usize,
    /// Element equality tests, i.e. verification equations evaluated.
    pub equation_checks: usize,
}

impl OpCounter {
    pub fn snapshot(&self) -> OpCounts {
        OpCounts {
            scalar_mults: self.mults.load(Ordering::Relaxed),
            equation_checks: self.comparisons.load(Ordering::Relaxed),
        }
    }

    pub fn reset(&self) {
        self.mults.store(0, Ordering::Relaxed);
        self.comparisons.store(0, Ordering::Relaxed);
    }
}

#[derive(Clone)]
pub struct Counted<E> {
    inner: E,
    counter: Arc<OpCounter>,
}

impl<E> Counted<E> {
    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: fmt::Debug> fmt::Debug for Counted<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.inner.fmt(f)
    }
}

impl<E: PartialEq> PartialEq for Counted<E> {
    fn eq(&self, other: &Self) -> bool {
        self.counter.comparisons.fetch_add(1, Ordering::Relaxed);
        self.inner == other.inner
    }
}

impl<E: Eq> Eq for Counted<E> {}

#[derive(Clone, Debug)]
pub struct CountingGroup<G> {
    inner: G,
    counter: Arc<OpCounter>,
}

impl<G: Group> CountingGroup<G> {
    pub fn new(inner: G) -> Self {
        CountingGroup {
            inner,
            counter: Arc::new(OpCounter::default()),
        }
    }

    pub fn counter(&self) -> &OpCounter {
        &self.counter
    }

    fn wrap(&self, inner: G::Element) -> Counted<G::Element> {
        Counted {
            inner,
            counter: Arc::clone(&self.counter),
        }
    }
}

impl<G: Group> Group for CountingGroup<G> {
    type Element = Counted<G::Element>;

    fn name(&self) -> &str {
        self.inner.name()
    }

    fn scalars(&self) -> &ScalarField {
        self.inner.scalars()
    }

    fn generator(&self) -> Self::Element {
        self.wrap(self.inner.generator())
    }

    fn identity(&self) -> Self::Element {
        self.wrap(self.inner.identity())
    }

    fn is_identity(&self, e: &Self::Element) -> bool {
        self.inner.is_identity(&e.inner)
    }

    fn contains(&self, e: &Self::Element) -> bool {
        self.inner.contains(&e.inner)
    }

    fn add(&self, lhs: &Self::Element, rhs: &Self::Element) -> Self::Element {
        self.wrap(self.inner.add(&lhs.inner, &rhs.inner))
    }

    fn negate(&self, e: &Self::Element) -> Self::Element {
        self.wrap(self.inner.negate(&e.inner))
    }

    fn mul(&self, k: &Scalar, e: &Self::Element) -> Self::Element {
        self.counter.mults.fetch_add(1, Ordering::Relaxed);
        self.wrap(self.inner.mul(k, &e.inner))
    }

    fn encode_element(&self, e: &Self::Element) -> Vec<u8> {
        self.inner.encode_element(&e.inner)
    }

    fn decode_element(&self, bytes: &[u8]) -> Result<Self::Element, GroupError> {
        self.inner.decode_element(bytes).map(|e| self.wrap(e))
    }

    fn element_len(&self) -> usize {
        self.inner.element_len()
    }

    fn validate(&self) -> Result<(), GroupError> {
        self.inner.validate()
    }
}
