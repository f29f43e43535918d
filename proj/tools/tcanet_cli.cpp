#include "tcanet/cli.hpp"

int main(int argc, char** argv) { return tcanet::cli::run(argc, argv); }
