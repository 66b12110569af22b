fn main() {
    println!("heis");
}
