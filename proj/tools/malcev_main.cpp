#include <malcev/cli.hpp>

int main(int argc, char** argv) { return malcev::cli::run(argc, argv); }
