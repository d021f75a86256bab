#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace wmadv::csv {

// RFC 4180 subset: comma separator, fields quoted only when they contain a
// comma, quote, CR or LF; embedded quotes doubled.
std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

// Reads one logical record (quoted fields may span lines). Returns false at
// EOF. Throws ValidationError on an unterminated quote.
bool read_row(std::istream& in, std::vector<std::string>& fields);

}  // namespace wmadv::csv
