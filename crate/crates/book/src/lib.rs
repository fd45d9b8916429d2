//! Compiles and runs the code blocks of the guide in `book/` as doctests.

macro_rules! chapter {
    ($name:ident, $file:literal) => {
        #[doc = include_str!(concat!("../../../book/src/", $file))]
        pub mod $name {}
    };
}

chapter!(introduction, "introduction.md");
chapter!(cards, "cards.md");
chapter!(actions, "actions.md");
chapter!(decomposition, "decomposition.md");
chapter!(rhcp, "rhcp.md");
chapter!(engine, "engine.md");
chapter!(features, "features.md");
chapter!(cql, "cql.md");
chapter!(arena, "arena.md");
chapter!(service, "service.md");
