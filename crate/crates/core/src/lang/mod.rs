//! Languages as characteristic sequences, and the string functions that act on them.

mod enumeration;
mod functions;
mod language;

pub use enumeration::{
    cmp_enumeration, index_to_string, pair, show, string_to_index, unpair, val, val_below,
};
pub use functions::{
    coin_flip_selector, decide_from_theta_bits, enumeration_min_selector, first_argument_selector,
    identity_reduction, left_cut_selector, noop_oracle, oracle_left_cut_selector, restrict_oracle,
    strip_last_bit_reduction, theta_bits, theta_bits_oracle, FunctionRegistry, LengthBound,
    NamedFunction, OraclePolicy, QueryAudit, QueryRecord, ReductionFunction, RestrictedOracle,
    SelectorFn, SelectorFunction, StringFn,
};
pub use language::{
    growth_rate, parse_fixture, read_fixture, run_constructor, write_fixture, LanguageKind,
    LanguageSpec, MembershipFn,
};
