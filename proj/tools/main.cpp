#include "perdiff/cli.hpp"

int main(int argc, char** argv) { return perdiff::cli::run(argc, argv); }
