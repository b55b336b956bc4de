pub mod bound;
pub mod cli;
pub mod detlaws;
pub mod fredholm;
pub mod linalg;
pub mod mahler;
pub mod multi;
pub mod opmat;
pub mod rings;
pub mod selftest;
pub mod upengine;
pub mod weights;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/rings.md")]
    mod rings {}
    #[doc = include_str!("../../../book/src/mahler.md")]
    mod mahler {}
    #[doc = include_str!("../../../book/src/operators.md")]
    mod operators {}
    #[doc = include_str!("../../../book/src/fredholm.md")]
    mod fredholm {}
    #[doc = include_str!("../../../book/src/weights.md")]
    mod weights {}
    #[doc = include_str!("../../../book/src/up.md")]
    mod up {}
    #[doc = include_str!("../../../book/src/detlaws.md")]
    mod detlaws {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
