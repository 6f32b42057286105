#include "wordchoice/cli.hpp"

int main(int argc, char** argv) { return wordchoice::cli::run(argc, argv); }
