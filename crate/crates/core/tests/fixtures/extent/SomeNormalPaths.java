package org.example.extent;

import android.database.Cursor;
import android.database.sqlite.SQLiteDatabase;

public class SomeNormalPaths {
    private SQLiteDatabase db;

    void leak(boolean done) {
        Cursor c = db.query("t", null, null, null, null, null, null);
        if (done) {
            c.close();
        }
    }
}
