//! Holds the `acceptance` test target, which runs last in the workspace so a
//! failing criterion does not stop the other suites.
