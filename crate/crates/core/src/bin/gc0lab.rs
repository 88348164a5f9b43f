fn main() {
    println!("gc0lab");
}
