//! Scratch: run selected acceptance criteria by id.
fn main() {
    let ids: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    for id in ids {
        let rep = match id {
            1 => constel::suite::criterion_1(),
            2 => constel::suite::criterion_2(),
            3 => constel::suite::criterion_3(),
            4 => constel::suite::criterion_4(),
            5 => constel::suite::criterion_5(),
            6 => constel::suite::criterion_6(),
            7 => constel::suite::criterion_7(),
            8 => constel::suite::criterion_8(),
            9 => constel::suite::criterion_9(),
            _ => continue,
        };
        println!("{rep}");
    }
}
