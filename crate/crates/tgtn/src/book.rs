//! Doc-test anchor for the mdbook guide in `book/`.
//!
//! Each chapter is attached here verbatim via `#[doc = include_str!(...)]`,
//! so every fenced Rust block in the book compiles and runs under
//! `cargo test` — the book cannot drift from the crate's API.

macro_rules! chapter {
    ($name:ident, $path:literal) => {
        #[doc = include_str!($path)]
        pub struct $name;
    };
}

chapter!(Overview, "../../../book/src/overview.md");
chapter!(Data, "../../../book/src/data.md");
chapter!(GraphChapter, "../../../book/src/graph.md");
chapter!(ModelChapter, "../../../book/src/model.md");
chapter!(TrainingChapter, "../../../book/src/training.md");
chapter!(MetricsChapter, "../../../book/src/metrics.md");
chapter!(StreamingChapter, "../../../book/src/streaming.md");
chapter!(CliChapter, "../../../book/src/cli.md");
