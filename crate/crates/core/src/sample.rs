//! Small hand-checkable streams.

use crate::linkstream::{Event, LinkStream, TimeSpan};

/// Two users and four items over eight interactions at integer times
/// `t1 = 1 .. t6 = 6`, observed over `[0, 7]`.
///
/// `u1` picks `i1, i2, i3, i2` at `t1, t2, t4, t6`; `u2` picks
/// `i3, i3, i4, i4` at `t1, t2, t3, t5`.
pub fn guiding_stream() -> LinkStream {
    let events = vec![
        Event::new(1, "u1", "i1"),
        Event::new(1, "u2", "i3"),
        Event::new(2, "u1", "i2"),
        Event::new(2, "u2", "i3"),
        Event::new(3, "u2", "i4"),
        Event::new(4, "u1", "i3"),
        Event::new(5, "u2", "i4"),
        Event::new(6, "u1", "i2"),
    ];
    LinkStream::with_span(events, TimeSpan { start: 0, end: 7 }).expect("valid fixture")
}
