#include "htlm/cli.hpp"

int main(int argc, char** argv) { return htlm::cli::run(argc, argv); }
