//! Laplace–Beltrami operator on the orthogonal Stiefel manifold
//! St_p^n = {U ∈ R^{n×p} : U^tU = I_p} with the metric induced by the
//! Frobenius inner product.
//!
//! The operator is evaluated from the ambient derivatives of any smooth
//! prolongation f of a function on St_p^n:
//!
//! ```text
//! Δ_St f = Δf − (n − (p+1)/2)·tr(U^t∇f) − ½·tr((I_p ⊗ UU^t + Λ(U))·Hess f)
//! ```
//!
//! where Λ(U) is the np×np block matrix with blocks u_j u_i^t. An independent
//! evaluation from an explicit tangent frame and the Lagrange multipliers of
//! the constraints ([`laplace::laplace_frame_oracle`]) is provided for
//! cross-checking, together with a Brownian-motion generator check in
//! [`diffusion`].

pub mod ambient;
pub mod diffusion;
mod error;
pub mod functions;
pub mod laplace;
pub mod tangent;
pub mod verify;

pub use ambient::{
    commutation_matrix, constraint_gradient, constraint_hessian, constraint_value, kron, project_to_stiefel,
    random_stiefel, random_stiefel_with, unvec, vec, ConstraintIndex, DenseMatrix, StiefelPoint,
};
pub use error::{Error, Result};
pub use functions::{BuiltinFamily, ExpressionField, FieldRef, ScalarField};
pub use laplace::{laplace_closed, laplace_frame_oracle, LaplaceReport, Method};
