#include "gripstat/cli.hpp"

int main(int argc, char** argv) { return gripstat::cli::main(argc, argv); }
