#include "cli.hpp"

int main(int argc, char** argv) { return tse::cli::run(argc, argv); }
