// Float math comes from libm through num-traits when std is absent. When a
// dependency pulls std into the crate graph (dev-dependencies do), the
// inherent float methods win and the import goes unused, hence the allows at
// the use sites.
#[allow(unused_imports)]
pub(crate) use num_traits::Float;
