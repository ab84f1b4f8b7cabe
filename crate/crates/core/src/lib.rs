//! Lifts of torus diffeomorphisms built from cosine shears, together with the
//! numerical machinery that certifies weak spreading for conjugated
//! rotations `h R_α h⁻¹`.
//!
//! The crate is organised bottom-up:
//!
//! * [`torus_maps`]: exact symbolic plane maps commuting with `ℤ²`, their
//!   inverses, Lipschitz bounds and complex band norms.
//! * [`geometry`]: three-valued ε-density verdicts, adaptive curve images,
//!   directional widths and an exact nearest-neighbour index.
//! * [`construction`]: parameter selection for the shear conjugacy, the
//!   containment/density claim for the two short segments, the rotation
//!   landing search and the end-to-end spreading search.
//! * [`foliation`]: width-growth certificates and circle rotation numbers.

pub mod construction;
pub mod foliation;
pub mod geometry;
pub mod torus_maps;

mod par;

pub use construction::{
    build_h, choose_m, claim1_verify, event_cloud, find_k_r, resolve_frequency, segments,
    spreading_search, validate_params, Claim1Certificate, ConstructionError, DensityCertificate,
    LandingPair, ParamError, SearchMode, SearchOptions, Segment, SpreadParams,
};
pub use foliation::{
    default_directions, rotation_number, width_growth_certificate, CircleLift, RotationEstimate,
    WidthCertificate,
};
pub use geometry::{
    direction_width, eps_dense, eps_dense_square, nearest_distance, refine_segment_image, Ball,
    DensityVerdict, GeometryError, PointCloud, Polyline, Verdict,
};
pub use torus_maps::{d_rho, BandNormQuery, MapError, MapExpr, Point};
