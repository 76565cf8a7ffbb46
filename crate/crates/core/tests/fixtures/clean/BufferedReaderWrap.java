package org.example.reader;

import java.io.BufferedReader;
import java.io.File;
import java.io.FileReader;
import java.io.IOException;

public class BufferedReaderWrap {
    String firstLine(File f) throws IOException {
        BufferedReader r = new BufferedReader(new FileReader(f));
        String line = r.readLine();
        r.close();
        return line;
    }
}
